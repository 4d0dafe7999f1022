"""Hot toggle-walk kernels with a compiled core and a pure-Python fallback.

The compiled extension (``stergm._engine._core``, built from Cython) is
preferred when importable; set ``STERGM_PURE_PYTHON=1`` to force the
fallback. Both backends consume pre-generated random streams identically,
so results are bit-for-bit equal across backends for the same seed.
"""

import os

if os.environ.get("STERGM_PURE_PYTHON"):
    from . import pure as _impl
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pure as _impl

mh_phase = _impl.mh_phase
anneal_walk = _impl.anneal_walk
BACKEND = _impl.BACKEND


def available_backends():
    names = ["pure"]
    try:
        from . import _core  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
