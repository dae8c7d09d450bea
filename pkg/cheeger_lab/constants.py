import math

# neighbour offsets and their perimeter weights, per dimension
STENCILS = {
    'L1': {
        1: (((1,), 1.0),),
        2: (((1, 0), 1.0), ((0, 1), 1.0)),
    },
    'CroftonC8': {
        2: (
            ((1, 0), math.pi / 8),
            ((0, 1), math.pi / 8),
            ((1, 1), math.pi / (8 * math.sqrt(2))),
            ((1, -1), math.pi / (8 * math.sqrt(2))),
        ),
    },
}

DEFAULT_STENCIL = 'L1'

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_VALIDATION = 2
EXIT_VERDICT_FAILED = 3
EXIT_INTERRUPTED = 130

SWEEP_COLUMNS = ('p', 'lambda', 'u_inf', 'u_l1', 'z_sup', 'residual')
VERDICT_COLUMNS = ('name', 'pass', 'margin')
EIGEN_COLUMNS = ('p', 'lambda', 'iterations', 'residual', 'converged')
CHEEGER_COLUMNS = ('method', 'h', 'cells', 'iterations')

EXPRESSION_NAMES = (
    'x', 'y', 'abs', 'min', 'max', 'exp', 'sin', 'cos', 'sqrt', 'log', 'pi')
