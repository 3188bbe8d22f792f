"""Image compression by overfitting sine-activated MLPs to pixels."""
from .arch_search import PRESETS, preset, sweep, valid_architectures
from .decoder import decode, decode_file, decode_progressive
from .encoder import RunMetrics, TrainConfig, encode, resume
from .image_plane import ImagePlane, full_grid, load_image, psnr, save_image, subgrid
from .optimizer import AdamState, adam_step
from .siren import Architecture, SirenNetwork, backward, forward, init_siren
from .storage import QuantizedModel, bpp, dequantize, quantize, read_coin, write_coin

__version__ = "0.1.0"
