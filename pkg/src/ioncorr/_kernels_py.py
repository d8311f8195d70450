"""Pure-numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used
when the extension is not built or ``IONCORR_BACKEND=python``.
"""

import numpy as np

# (m1, m2) pairs of disjoint 4-bit masks: 81 of them
_PAIRS = np.array([(a, b) for a in range(16) for b in range(16) if a & b == 0], dtype=np.intp)
_SCATTER = np.zeros((len(_PAIRS), 16))
_SCATTER[np.arange(len(_PAIRS)), _PAIRS[:, 0] | _PAIRS[:, 1]] = 1.0


def eq2_moments(phases, active, s):
    """Unnormalised G2(0) and intensity for uniform saturation ``s``.

    ``phases[r, j]`` is ``(k n - k_L) . r_j`` of emitter ``j`` in
    realisation ``r``; dark emitters (``active == 0``) are excluded. Returns
    ``(G2, I, n_active)`` as arrays of length R; rows without active
    emitters give zeros.
    """
    phases = np.asarray(phases, dtype=np.float64)
    act = np.asarray(active, dtype=bool)
    n = act.sum(axis=1)
    e1 = np.where(act, np.exp(-1j * phases), 0.0).sum(axis=1)
    e2 = np.where(act, np.exp(-2j * phases), 0.0).sum(axis=1)
    a2 = 0.5 * s / (1.0 + s) ** 2
    i_se = n * s * s / (2.0 * (1.0 + s) ** 2)
    i_coh = a2 * np.abs(e1) ** 2
    diff = a2 * (e1 * e1 - e2)
    nz = np.maximum(n, 1)
    # 4/(N s) I_SE^2 written as N s^3/(1+s)^4 so that s = 0 is regular
    g2 = (
        (2.0 - 2.0 / nz) * i_se**2
        + n * s**3 / (1.0 + s) ** 4
        + 4.0 * (1.0 - 2.0 / nz) * i_se * i_coh
        + np.abs(diff) ** 2
    )
    g2 = np.where(n > 0, g2, 0.0)
    return g2, np.where(n > 0, i_se + i_coh, 0.0), n


def subset_product(factors):
    """Product of per-emitter polynomials in four nilpotent variables.

    ``factors[x, t, m]`` is the coefficient of monomial ``m`` (a 4-bit
    mask) for emitter ``x`` at grid point ``t``; coefficient 0 must be 1
    (the emitter's trace). Returns the ``(T, 16)`` coefficients of the
    product, where monomials multiply only when their masks are disjoint.
    """
    factors = np.asarray(factors, dtype=np.complex128)
    n, t, _ = factors.shape
    out = np.zeros((t, 16), dtype=np.complex128)
    out[:, 0] = 1.0
    lhs, rhs = _PAIRS[:, 0], _PAIRS[:, 1]
    for x in range(n):
        out = (out[:, lhs] * factors[x][:, rhs]) @ _SCATTER
    return out
