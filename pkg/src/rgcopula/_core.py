"""Backend selection for the recursive filters.

The compiled extension is used when importable; ``RGCOPULA_PURE_PYTHON=1``
forces the Python fallback.
"""

import logging
import os

logger = logging.getLogger(__name__)

_NAMES = (
    "rg_logh",
    "garch_h",
    "gas_normal",
    "gas_student",
    "gas_rgumbel",
    "gas_sim_normal",
    "gas_sim_student",
    "gas_sim_rgumbel",
)

if os.environ.get("RGCOPULA_PURE_PYTHON", "") not in ("", "0"):
    from rgcopula import _fallback as _impl

    BACKEND = "python"
else:
    try:
        from rgcopula import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from rgcopula import _fallback as _impl

        BACKEND = "python"
        logger.debug("compiled kernels unavailable, using Python fallback")

rg_logh = _impl.rg_logh
garch_h = _impl.garch_h
gas_normal = _impl.gas_normal
gas_student = _impl.gas_student
gas_rgumbel = _impl.gas_rgumbel
gas_sim_normal = _impl.gas_sim_normal
gas_sim_student = _impl.gas_sim_student
gas_sim_rgumbel = _impl.gas_sim_rgumbel

__all__ = ["BACKEND", *_NAMES]
