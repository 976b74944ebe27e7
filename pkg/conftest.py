import os
import sys
import tempfile

ROOT = os.path.dirname(os.path.abspath(__file__))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)

# app.py opens its database at import time
_db_dir = tempfile.mkdtemp(prefix='gridgen-test-')
os.environ['GRIDGEN_DB'] = os.path.join(_db_dir, 'gridgen.json')
