COMMAND_RECOVER_FIXED = "recover-fixed"
COMMAND_RECOVER_MOVING = "recover-moving"
COMMAND_ABLATION = "ablation"
COMMAND_SWEEP_ALPHA = "sweep-alpha"
COMMAND_GENERATE = "generate"
COMMAND_GRADCHECK = "gradcheck"

DEFAULT_SWEEP_ALPHAS = (0.1, 1.0, 10.0)
GRADCHECK_CONTROL_SLOPE = 0.1
GRADCHECK_TARGET_SLOPE = 0.2

SLUG_ONLY_JACOBIAN = "only_jacobian"
SLUG_JACOBIAN_CURL = "jacobian_curl"
