"""Inner event loop for the thinned jump chain.

The loop consumes pre-drawn random buffers (site indices, displacement
uniforms, acceptance uniforms) positionally, so the numba-compiled kernel and
the pure-Python fallback produce bit-identical trajectories for a given
generator stream. Set ABCFLUX_NO_NUMBA=1 to force the fallback.
"""

from __future__ import annotations

import os


def _apply_events_py(species, sites, u_disp, u_acc, cdf, disps, acceptance):
    size = species.shape[0]
    ncdf = cdf.shape[0]
    swaps = 0
    for i in range(sites.shape[0]):
        x = sites[i]
        u = u_disp[i]
        lo = 0
        hi = ncdf
        while lo < hi:
            mid = (lo + hi) >> 1
            if cdf[mid] > u:
                hi = mid
            else:
                lo = mid + 1
        if lo >= ncdf:
            lo = ncdf - 1
        y = (x + disps[lo]) % size
        sa = species[x]
        sb = species[y]
        if sa != sb and u_acc[i] < acceptance[sa, sb]:
            species[x] = sb
            species[y] = sa
            swaps += 1
    return swaps


if os.environ.get("ABCFLUX_NO_NUMBA"):
    apply_events = _apply_events_py
    HAVE_NUMBA = False
else:
    try:
        from numba import njit

        apply_events = njit(
            "int64(int8[::1], int64[::1], float64[::1], float64[::1], "
            "float64[::1], int64[::1], float64[:, ::1])",
            cache=True, nogil=True)(_apply_events_py)
        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover
        apply_events = _apply_events_py
        HAVE_NUMBA = False
