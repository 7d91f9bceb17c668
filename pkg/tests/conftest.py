import sys
from pathlib import Path

# make `oracles` importable regardless of pytest rootdir
sys.path.insert(0, str(Path(__file__).parent))
