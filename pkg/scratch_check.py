"""Scratch validation of oracle vs closed-form agreement (not shipped)."""
import numpy as np
from palmtrack import oracle, pointproc
from palmtrack.pointproc import EvalMode, PalmMethod

rng = np.random.default_rng(7)

def random_model(rng, s=None, k=None):
    s = s or rng.integers(2, 6)
    k = k if k is not None else rng.integers(1, 4)
    f = rng.uniform(0.05, 0.6, s)
    f *= rng.uniform(0.3, 1.2) / (f.sum())
    pd = rng.uniform(0.05, 0.95, s)
    lik = rng.uniform(0.02, 2.0, (s, k))
    lam = rng.uniform(0.1, 1.5, k)
    return oracle.DiscreteModel(f, pd, lik, lam, cell_volume=1.0)

worst = {}
for trial in range(12):
    m = random_model(rng)
    n_max = oracle.suggest_n_max(m)
    post = oracle.enumerate_posterior(m, n_max)
    mom = oracle.oracle_moments(post)
    ctx = m.context()
    S = m.n_states

    # c1 vs m1
    c1v = np.array([pointproc.c1(ctx, x) for x in range(S)])
    err = np.max(np.abs(c1v - mom.m1) / np.maximum(np.abs(mom.m1), 1e-30))
    worst['c1'] = max(worst.get('c1', 0), err)

    # c2 vs m2 - m1 m1
    m2c = np.array([[pointproc.c2(ctx, a, b) for b in range(S)] for a in range(S)])
    ref = mom.m2 - np.outer(mom.m1, mom.m1)
    err = np.max(np.abs(m2c - ref) / np.maximum(np.abs(ref), 1e-12))
    worst['c2'] = max(worst.get('c2', 0), err)

    # pmf
    pmf = pointproc.canonical_pmf(ctx, n_max=n_max)
    err = np.max(np.abs(pmf.probabilities - mom.canonical_pmf))
    worst['pmf'] = max(worst.get('pmf', 0), err)

    # reduced palm one + pair (exact)
    a = int(np.argmax(mom.m1))
    b = (a + 1) % S
    rp1 = mom.reduced_palm([a])
    rp1c = np.array([pointproc.reduced_palm_intensity(ctx, x, [a], PalmMethod.EXACT_ONE) for x in range(S)])
    err = np.max(np.abs(rp1 - rp1c) / np.maximum(np.abs(rp1), 1e-30))
    worst['rp1'] = max(worst.get('rp1', 0), err)

    rp2 = mom.reduced_palm([a, b])
    rp2c = np.array([pointproc.reduced_palm_intensity(ctx, x, [a, b], PalmMethod.EXACT_PAIR) for x in range(S)])
    err = np.max(np.abs(rp2 - rp2c) / np.maximum(np.abs(rp2), 1e-30))
    worst['rp2'] = max(worst.get('rp2', 0), err)

    # conditional pdf, cond sizes 0 and 1
    for cond in ([], [a]):
        pdfo = mom.conditional_pdf(cond)
        pdf_fn = pointproc.conditional_track_pdf(ctx, cond, m.quadrature)
        pdfc = np.array([pdf_fn(x) for x in range(S)])
        err = np.max(np.abs(pdfo - pdfc) / np.maximum(np.abs(pdfo), 1e-30))
        worst[f'pdf{len(cond)}'] = max(worst.get(f'pdf{len(cond)}', 0), err)

    # mass identity
    n = np.arange(len(pmf.probabilities))
    err = abs(ctx.expected_count - float(np.sum(n * pmf.probabilities)))
    worst['mass'] = max(worst.get('mass', 0), err)

    # rho in [0,1]
    for _ in range(20):
        x1, x2 = rng.integers(0, S, 2)
        if mom.m1[x1] > 0 and mom.m1[x2] > 0:
            rho = pointproc.pair_correlation(ctx, int(x1), int(x2))
            assert -1e-12 <= rho <= 1 + 1e-12, rho

for k, v in sorted(worst.items()):
    print(f"{k:6s} worst rel err: {v:.3e}")
