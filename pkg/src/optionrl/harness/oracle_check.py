"""Fixed-seed comparisons of the fast code paths against the brute-force oracles."""
import numpy as np

from ..advantage import goa_backward
from ..algorithms import _joint_backward, _joint_forward
from ..exceptions import UsageError
from ..gradcheck import finite_diff_grad, rel_error
from ..inference import backward_pass, forward_pass, joint_posterior
from ..oracles import GoaInstance, enumerate_option_posteriors, mlp_grad_instance, random_joints

FB_TOL = 1e-10
GOA_TOL = 1e-4
MLP_TOL = 1e-6


def _one_episode(T):
    starts = np.zeros(T, dtype=bool)
    starts[0] = True
    dones = np.zeros(T, dtype=bool)
    dones[-1] = True
    return starts, dones


def check_fb_enum(draws=50, seed=0):
    """Largest absolute deviation per (n, T) between recursions and enumeration."""
    rng = np.random.default_rng(seed)
    results = []
    for n in (1, 2, 3):
        for T in (1, 2, 3, 4):
            worst = 0.0
            for _ in range(draws):
                _, _, _, joints = random_joints(rng, T, n)
                starts, dones = _one_episode(T)
                zetas, alphas = forward_pass(joints, starts)
                beta, beta_next = backward_pass(joints, alphas, dones)
                post = joint_posterior(zetas, beta_next, joints, alphas)
                filtered, smoothed, pairs = enumerate_option_posteriors(joints)
                worst = max(worst, np.max(np.abs(zetas - filtered[:T])),
                            np.max(np.abs(zetas * beta - smoothed[:T])),
                            np.max(np.abs(post - pairs)))
            results.append((f"n={n} T={T}", worst, FB_TOL))
    return results


def check_goa_grad(instances=20, seed=0):
    """Relative error of the GOA-weighted gradient against finite differences."""
    rng = np.random.default_rng(seed)
    results = []
    for k in range(instances):
        n, T = 1 + k % 3, 1 + (k // 3) % 5
        inst = GoaInstance(rng, n, T)
        batch = dict(obs=inst.obs, actions=inst.actions)
        probs, pcache, tr, tcache, pa, joint = _joint_forward(batch, inst.nets)
        _, _, w = goa_backward(inst.a_opt, inst.zetas, joint, inst.alphas, inst.dones)
        analytic = _joint_backward(batch, inst.nets, probs, pcache, tr, tcache, pa, w,
                                   np.zeros_like(probs))
        numeric = inst.numeric_grad()
        a = [g for name in ("policy", "transition") for g in analytic[name]]
        b = [g for name in ("policy", "transition") for g in numeric[name]]
        results.append((f"instance {k} n={n} T={T}", rel_error(a, b), GOA_TOL))
    return results


def check_mlp_grad(draws=20, seed=0):
    rng = np.random.default_rng(seed)
    results = []
    for k in range(draws):
        net, x, g = mlp_grad_instance(rng)
        _, inputs = net.forward_cached(x[None])
        analytic, _ = net.backward(inputs, g[None])
        numeric = finite_diff_grad(lambda m: float(m.forward(x[None])[0] @ g), net, h=1e-5)
        results.append((f"draw {k}", rel_error(analytic, numeric), MLP_TOL))
    return results


SUITES = {"fb-enum": check_fb_enum, "goa-grad": check_goa_grad, "mlp-grad": check_mlp_grad}


def run_suite(name, log=print):
    """Run a named suite, print one line per check, and return True when all pass."""
    if name not in SUITES:
        raise UsageError(f"unknown oracle suite {name!r}; choose from {sorted(SUITES)}")
    ok = True
    for label, err, tol in SUITES[name]():
        passed = err < tol
        ok &= passed
        log(f"{'PASS' if passed else 'FAIL'} {name} {label}: error {err:.3e} (tolerance {tol:.0e})")
    log(f"{name}: {'all checks passed' if ok else 'FAILED'}")
    return ok
