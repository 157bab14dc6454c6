"""Problem instances, Lipschitz estimation, reference minimizers and file I/O."""

from .deblur import ConvolutionOperator, DeblurInstance, gaussian_kernel, gen_deblur, synthetic_image
from .lasso import LassoInstance, gen_random_lasso
from .lipschitz import lipschitz_estimate
from .pgm import encode_pgm, load_pgm, parse_pgm, save_pgm
from .reference import solve_reference
from .storage import MAGIC, dumps_instance, load_instance, loads_instance, save_instance

__all__ = [
    "ConvolutionOperator", "DeblurInstance", "gaussian_kernel", "gen_deblur", "synthetic_image",
    "LassoInstance", "gen_random_lasso", "lipschitz_estimate",
    "encode_pgm", "load_pgm", "parse_pgm", "save_pgm", "solve_reference",
    "MAGIC", "dumps_instance", "load_instance", "loads_instance", "save_instance",
]
