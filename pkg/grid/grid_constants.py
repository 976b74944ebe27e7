DEFAULT_NX = 65
DEFAULT_NY = 65
DEFAULT_BOUNDS = (1.0, 65.0, 1.0, 65.0)
MIN_NODES = 3

DEFAULT_ALPHA = 1.0
DEFAULT_TSTEP = 1.0
DEFAULT_MAX_ITERS = 2000
DEFAULT_TOL = 1e-10
DEFAULT_TOL_WINDOW = 10
DEFAULT_DIVERGENCE_FACTOR = 10.0
DEFAULT_MAX_HALVINGS = 30

DEFAULT_FIXED_AMPLITUDE = 2.0
DEFAULT_MOVING_AMPLITUDE = 1.0

DEFAULT_FD_EPS = 1e-5
DEFAULT_GRADCHECK_PROBES = 20
GRADCHECK_TOLERANCE = 1e-5

CSV_FLOAT_FORMAT = '.17g'

STOP_MAX_ITERS = 'max_iters'
STOP_TOLERANCE = 'tolerance'
STOP_DIVERGENCE = 'divergence'

LABEL_ONLY_JACOBIAN = 'Only Jacobian'
LABEL_JACOBIAN_CURL = 'Jacobian and Curl'
