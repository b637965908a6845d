# dump_matrix.py
import sys, os, re

# Ensure we can import the 'sizechain' package from src/
PKG_ROOT = os.path.join(os.path.dirname(__file__), "src")
if PKG_ROOT not in sys.path:
    sys.path.insert(0, PKG_ROOT)

from sizechain.errors import SizeChainError
from sizechain.reports import matrix_to_str, read_matrix_csv

def dump(path: str):
    # years come from a ..._YYYY_YYYY file name when there is one
    m = re.search(r"(\d{4})_(\d{4})\.csv$", path)
    origin, dest = (int(m.group(1)), int(m.group(2))) if m else (0, 1)
    matrix = read_matrix_csv(path, origin, dest, os.path.basename(path))
    print(matrix_to_str(matrix), end="")
    sums = matrix.column_sums()
    print("column sums: " + " ".join("-" if s != s else f"{s:.4f}" for s in sums))

if __name__ == "__main__":
    if len(sys.argv) != 2:
        print("Usage: python dump_matrix.py <matrix.csv>")
        sys.exit(1)
    try:
        dump(sys.argv[1])
    except SizeChainError as e:
        print(f"{e.category.capitalize()} error: {e}")
        sys.exit(int(e.exit_code))
