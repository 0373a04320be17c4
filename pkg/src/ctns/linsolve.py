"""Matrix-free preconditioned conjugate gradient.

Hand-rolled rather than delegated so the stopping rule is exactly the one
the step contracts need (relative two-norm and/or absolute max-norm on the
true residual) and runs are bit-reproducible across library versions.
"""

import numpy as np

from .errors import LinearSolveFailure


def pcg(apply_a, b, x0=None, *, diag=None, rtol=0.0, inf_tol=None,
        abs2_tol=None, maxiter=1000, name="linear system"):
    """Solve A x = b for symmetric positive (semi)definite matrix-free A.

    apply_a  callable on arrays shaped like b
    diag     Jacobi preconditioner diagonal (optional)
    rtol     stop when ||r||_2 <= rtol * ||b||_2 (if > 0)
    inf_tol  stop when ||r||_inf <= inf_tol (if given)
    abs2_tol stop when ||r||_2 <= abs2_tol (if given)
    All enabled criteria are checked; whichever is enabled and satisfied stops the
    iteration.  Raises LinearSolveFailure when the budget is exhausted.
    """
    b = np.asarray(b, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_a(x)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0 and inf_tol is None and abs2_tol is None:
        return np.zeros_like(b)

    def converged(res):
        ok = False
        if rtol > 0.0:
            ok = ok or float(np.linalg.norm(res)) <= rtol * b_norm
        if inf_tol is not None:
            ok = ok or float(np.max(np.abs(res))) <= inf_tol
        if abs2_tol is not None:
            ok = ok or float(np.linalg.norm(res)) <= abs2_tol
        return ok

    if converged(r):
        return x
    z = r / diag if diag is not None else r
    p = z.copy()
    rz = float((r * z).sum())
    for _ in range(maxiter):
        ap = apply_a(p)
        pap = float((p * ap).sum())
        if pap <= 0.0:
            raise LinearSolveFailure(f"{name}: lost positive definiteness")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        if converged(r):
            return x
        z = r / diag if diag is not None else r
        rz_new = float((r * z).sum())
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise LinearSolveFailure(
        f"{name}: no convergence within {maxiter} iterations "
        f"(|r|_2={float(np.linalg.norm(r)):.3e}, |r|_inf={float(np.max(np.abs(r))):.3e})"
    )
