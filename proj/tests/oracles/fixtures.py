#!/usr/bin/env python3
"""Independent oracle for numeric fixtures frozen into the C++ tests.

Run from the repository root:

    python3 tests/oracles/fixtures.py

Every value printed here was transcribed by hand into the C++ test
sources (search for "fixtures.py").  The implementations below are
intentionally straightforward and depend only on numpy/scipy, so they
share no code with the library under test.
"""

import numpy as np
from scipy import stats
from scipy.special import digamma, gammaln

FMT = "%.17g"


def p(label, value):
    if np.ndim(value) == 0:
        print(f"{label} = {FMT % value}")
    else:
        print(f"{label} = [{', '.join(FMT % v for v in np.ravel(value))}]")


# --- stick-breaking bijector (remaining-mass convention, centered) -----
# forward: z_k = x_k / r_k, r_1 = 1, r_{k+1} = r_k - x_k
#          y_k = logit(z_k) + log(K - k)      (k = 1..K-1, 1-based)
# inverse: z_k = sigmoid(y_k - log(K - k)), x_k = z_k * r_k
# log|det J_inv|(y) = sum_k log z_k + log(1 - z_k) + log r_k

def sb_forward(x):
    K = len(x)
    y = np.empty(K - 1)
    r = 1.0
    for k in range(K - 1):
        z = x[k] / r
        y[k] = np.log(z / (1 - z)) + np.log(K - (k + 1))
        r -= x[k]
    return y


def sb_inverse(y):
    K = len(y) + 1
    x = np.empty(K)
    r = 1.0
    for k in range(K - 1):
        z = 1.0 / (1.0 + np.exp(-(y[k] - np.log(K - (k + 1)))))
        x[k] = z * r
        r *= 1.0 - z
    x[K - 1] = r
    return x


def sb_logjac_inv(y):
    K = len(y) + 1
    out = 0.0
    r = 1.0
    for k in range(K - 1):
        z = 1.0 / (1.0 + np.exp(-(y[k] - np.log(K - (k + 1)))))
        out += np.log(z) + np.log(1.0 - z) + np.log(r)
        r *= 1.0 - z
    return out


print("# stick-breaking")
p("sb_fwd_uniform3", sb_forward(np.array([1 / 3, 1 / 3, 1 / 3])))
x = np.array([0.2, 0.5, 0.1, 0.2])
p("sb_fwd_0p2_0p5_0p1_0p2", sb_forward(x))
p("sb_inv_roundtrip_err", np.max(np.abs(sb_inverse(sb_forward(x)) - x)))
y = np.array([0.3, -0.2, 0.7])
p("sb_inv_y_0p3_m0p2_0p7", sb_inverse(y))
p("sb_logjac_y_0p3_m0p2_0p7", sb_logjac_inv(y))
# change of variables: Dirichlet(2,3,4) density at x equals transformed
# density at y = fwd(x) plus logjac
alpha = np.array([2.0, 3.0, 4.0])
x3 = np.array([0.5, 0.2, 0.3])
y3 = sb_forward(x3)
p("dirichlet234_lpdf_x3", stats.dirichlet.logpdf(x3, alpha))
p("dirichlet234_unconstrained_lpdf_y3",
  stats.dirichlet.logpdf(x3, alpha) + sb_logjac_inv(y3))
p("sb_fwd_x3", y3)

print()
print("# scalar densities")
p("normal01_lpdf_0", stats.norm.logpdf(0.0, 0, 1))
p("normal_m1_2_lpdf_0p5", stats.norm.logpdf(0.5, -1.0, 2.0))
p("gamma_shape2_scale3_lpdf_4", stats.gamma.logpdf(4.0, 2.0, scale=3.0))
p("gamma_shape0p5_scale2_lpdf_0p7", stats.gamma.logpdf(0.7, 0.5, scale=2.0))
p("beta_2_5_lpdf_0p3", stats.beta.logpdf(0.3, 2.0, 5.0))
p("poisson_3p5_lpmf_2", stats.poisson.logpmf(2, 3.5))
p("poisson_3p5_lpmf_0", stats.poisson.logpmf(0, 3.5))
p("dirichlet_1_1_1_lpdf_uniform", stats.dirichlet.logpdf([1/3, 1/3, 1/3], [1, 1, 1]))
p("mvnormal_iso_mean12_sigma2_lpdf_03",
  stats.multivariate_normal.logpdf([0.0, 3.0], [1.0, 2.0], 4.0 * np.eye(2)))

print()
print("# logit bijector: x=0.3 -> y, logjac = log x + log(1-x)")
p("logit_0p3", np.log(0.3 / 0.7))
p("logit_logjac_0p3", np.log(0.3) + np.log(0.7))

print()
print("# digamma")
p("digamma_1", digamma(1.0))
p("digamma_0p5", digamma(0.5))
p("digamma_2", digamma(2.0))
p("digamma_4p7", digamma(4.7))
p("digamma_0p05", digamma(0.05))

print()
print("# linreg fixed-value evaluations: X=[[1,2]] (1x2), y=[2], w=[0.5,0], s=1")
X = np.array([[1.0, 2.0]])
yobs = np.array([2.0])
w = np.array([0.5, 0.0])
s = 1.0
prior = (stats.multivariate_normal.logpdf(w, np.zeros(2), np.eye(2))
         + stats.gamma.logpdf(s, 1.0, scale=1.0))
lik = np.sum(stats.norm.logpdf(yobs, X @ w, s))
p("linreg_prior", prior)
p("linreg_lik", lik)
p("linreg_joint", prior + lik)

print()
print("# query-language oracle values (linreg)")
# likelihood: X = [1.0, 2.0]', y = [2.0] | w = [0.5, 0.0], s = 1.0
p("q_lik", lik)
# prior: w = [1.0, 1.0]', s = 1.0
w11 = np.array([1.0, 1.0])
p("q_prior_w11", stats.multivariate_normal.logpdf(w11, np.zeros(2), np.eye(2))
  + stats.gamma.logpdf(1.0, 1.0, scale=1.0))
# prior: w = [0.0, 0.0]', s = 1.0
w00 = np.zeros(2)
p("q_prior_w00", stats.multivariate_normal.logpdf(w00, np.zeros(2), np.eye(2))
  + stats.gamma.logpdf(1.0, 1.0, scale=1.0))
# joint: X = [1.0, 2.0]', y = [2.0], w = [0.0, 0.0], s = 1.0
jl = (stats.multivariate_normal.logpdf(w00, np.zeros(2), np.eye(2))
      + stats.gamma.logpdf(1.0, 1.0, scale=1.0)
      + np.sum(stats.norm.logpdf(yobs, X @ w00, 1.0)))
p("q_joint", jl)

print()
print("# logreg fixed-value evaluation: X (2x3, col-per-obs), y=[1,0,1], w=[0.5,-0.25]")
Xl = np.array([[1.0, -1.0, 2.0], [0.5, 1.5, -0.5]])  # d=2, n=3
yl = np.array([1.0, 0.0, 1.0])
wl = np.array([0.5, -0.25])
v = 1.0 / (1.0 + np.exp(-(Xl.T @ wl)))
logreg_prior = stats.multivariate_normal.logpdf(wl, np.zeros(2), np.eye(2))
logreg_lik = np.sum(yl * np.log(v) + (1 - yl) * np.log(1 - v))
p("logreg_prior", logreg_prior)
p("logreg_lik", logreg_lik)
p("logreg_joint", logreg_prior + logreg_lik)

print()
print("# gamma entry link: som=2.0 under Gamma(1,1), stored ln 2, re-eval adds lpdf+logjac")
p("gamma11_lpdf_2", stats.gamma.logpdf(2.0, 1.0, scale=1.0))
p("gamma11_linked_term_2", stats.gamma.logpdf(2.0, 1.0, scale=1.0) + np.log(2.0))
