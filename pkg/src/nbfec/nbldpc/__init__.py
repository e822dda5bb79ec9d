from .code import (PRESET_CHECK_DEGREE, CodeConstructionError, QCCode, build_code,
                   code_dimensions, load_code, parse_code, preset_code)
from .decode import MAX_ITERS, DecoderResult, decode, post_fec_ser
from .encode import SystematicEncoder, encode

__all__ = [
    "PRESET_CHECK_DEGREE", "CodeConstructionError", "QCCode", "build_code", "code_dimensions",
    "load_code", "parse_code", "preset_code", "MAX_ITERS", "DecoderResult", "decode",
    "post_fec_ser", "SystematicEncoder", "encode",
]
