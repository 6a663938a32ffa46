"""Kernel backend selection.

The loop-shaped kernels (nccf, ola, interp gather/scatter) prefer the
compiled Cython core when it imported cleanly; DDSP_VOXKIT_PURE=1 forces
the pure numpy fallback. conv1d is always the pure im2col + BLAS form,
which benchmarks faster than compiled loops at the package's channel
counts (see benchmarks/bench_kernels.py).
"""

import os

from . import pure

BACKEND = "pure"
_impl = pure

if not os.environ.get("DDSP_VOXKIT_PURE"):
    try:
        from . import _core  # type: ignore[attr-defined]

        _impl = _core
        BACKEND = "compiled"
    except ImportError:
        pass

conv1d_fwd = pure.conv1d_fwd
conv1d_bwd = pure.conv1d_bwd
nccf = _impl.nccf
ola = _impl.ola
ola_adjoint = _impl.ola_adjoint
interp_gather = _impl.interp_gather
interp_scatter = _impl.interp_scatter
