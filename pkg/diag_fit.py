"""Emax gate probability on idealized S4-shaped data: chain-length and
noise-level sensitivity."""
import numpy as np

from droid.inference import EmaxModelSpec, McmcSettings, fit_emax

DOSES = (0.1, 0.3, 0.5, 0.7, 0.9)
TRUTH = (0.00, 0.08, 0.20, 0.34, 0.35)
N_PER = (4, 12, 18, 19, 17)


def make_data(sigma, seed):
    rng = np.random.default_rng(seed)
    data = []
    for d, m, n in zip(DOSES, TRUTH, N_PER):
        for y in m + sigma * rng.standard_normal(n):
            data.append((d, float(y)))
    return data


def gate(fit, delta=0.9):
    mu = fit.mu_draws(DOSES)
    pr4 = float(np.mean(mu[:, 3] >= delta * mu[:, 4]))
    sig = fit.draws.column("sigma")
    return pr4, [round(float(v), 3) for v in fit.mu_hat], float(sig.mean())


spec = EmaxModelSpec()
for sigma in (0.10, 0.15, 0.20, 0.30):
    prs = []
    for seed in range(5):
        data = make_data(sigma, 100 + seed)
        fit = fit_emax(data, spec, McmcSettings(2000, 2000), seed=50 + seed,
                       eval_doses=DOSES)
        pr4, mu_hat, sig_hat = gate(fit)
        prs.append(pr4)
        if seed == 0:
            print(f"sigma={sigma:.2f} seed0: pr_mu4={pr4:.3f} mu^={mu_hat}"
                  f" sigma^={sig_hat:.3f}")
    print(f"sigma={sigma:.2f} pr_mu4 over 5 datasets:",
          [round(p, 3) for p in prs])

print()
print("chain-length check at sigma=0.10, dataset seed 100:")
data = make_data(0.10, 100)
for settings in (McmcSettings(2000, 2000), McmcSettings(20000, 20000)):
    for s in (1, 2):
        fit = fit_emax(data, spec, settings, seed=s, eval_doses=DOSES)
        pr4, mu_hat, sig_hat = gate(fit)
        print(f"  burn={settings.burn_in} draws={settings.draws} seed={s}:"
              f" pr_mu4={pr4:.3f} mu^={mu_hat} accept={fit.draws.accept_rates}")
