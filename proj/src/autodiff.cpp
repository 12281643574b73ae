#include "ppl/autodiff.hpp"

#include <cmath>

#include "ppl/distributions.hpp"
#include "ppl/interpreter.hpp"
#include "ppl/kernels.hpp"

namespace ppl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void vadj_init(TapeNode& n) {
  if (n.vadj.empty()) n.vadj.assign(n.vval.size(), 0.0);
}

}  // namespace

void Tape::reverse(int output, std::vector<double>& grad) {
  ++reverse_sweeps_;
  if (output < 0) return;
  nodes_[static_cast<std::size_t>(output)].sadj = 1.0;

  for (int id = output; id >= 0; --id) {
    TapeNode& n = nodes_[static_cast<std::size_t>(id)];

    const auto scalar_parent = [&](int pid, double partial) {
      if (pid >= 0) nodes_[static_cast<std::size_t>(pid)].sadj += n.sadj * partial;
    };

    switch (n.kind) {
      case Op::Const:
        break;
      case Op::Input:
        if (n.is_vec) {
          vadj_init(n);
          for (std::size_t i = 0; i < n.vval.size(); ++i)
            grad[static_cast<std::size_t>(n.aux) + i] += n.vadj[i];
        } else {
          grad[static_cast<std::size_t>(n.aux)] += n.sadj;
        }
        break;

      // scalar ops and scalar density terms: partials cached forward
      case Op::AddSS:
      case Op::SubSS:
      case Op::MulSS:
      case Op::DivSS:
      case Op::NegS:
      case Op::ExpS:
      case Op::LogS:
      case Op::Log1pNegS:
      case Op::SqrtS:
      case Op::LogisticS:
      case Op::PowSS:
      case Op::NormalLpdf:
      case Op::GammaLpdf:
      case Op::BetaLpdf:
      case Op::BernLpmf:
      case Op::PoisLpmf:
        scalar_parent(n.a, n.p0);
        scalar_parent(n.b, n.p1);
        scalar_parent(n.c, n.p2);
        break;

      case Op::IndexV: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        a.vadj[static_cast<std::size_t>(n.aux)] += n.sadj;
        break;
      }
      case Op::Pack: {
        for (std::size_t i = 0; i < n.parents.size(); ++i)
          nodes_[static_cast<std::size_t>(n.parents[i])].sadj +=
              n.vadj.empty() ? 0.0 : n.vadj[i];
        break;
      }
      case Op::AddVV:
      case Op::SubVV: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        TapeNode& b = nodes_[static_cast<std::size_t>(n.b)];
        vadj_init(a);
        vadj_init(b);
        const double sign = n.kind == Op::AddVV ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n.vval.size(); ++i) {
          a.vadj[i] += n.vadj[i];
          b.vadj[i] += sign * n.vadj[i];
        }
        break;
      }
      case Op::NegV: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        for (std::size_t i = 0; i < n.vval.size(); ++i) a.vadj[i] -= n.vadj[i];
        break;
      }
      case Op::ScaleVS: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        TapeNode& b = nodes_[static_cast<std::size_t>(n.b)];
        vadj_init(a);
        const double s = n.x0;
        double acc = 0.0;
        for (std::size_t i = 0; i < n.vval.size(); ++i) {
          a.vadj[i] += n.vadj[i] * s;
          acc += n.vadj[i] * a.vval[i];
        }
        b.sadj += acc;
        break;
      }
      case Op::DivVS: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        TapeNode& b = nodes_[static_cast<std::size_t>(n.b)];
        vadj_init(a);
        const double s = n.x0;
        double acc = 0.0;
        for (std::size_t i = 0; i < n.vval.size(); ++i) {
          a.vadj[i] += n.vadj[i] / s;
          acc += n.vadj[i] * n.vval[i];
        }
        b.sadj += -acc / s;
        break;
      }
      case Op::ExpV: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        for (std::size_t i = 0; i < n.vval.size(); ++i)
          a.vadj[i] += n.vadj[i] * n.vval[i];
        break;
      }
      case Op::LogV: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        for (std::size_t i = 0; i < n.vval.size(); ++i)
          a.vadj[i] += n.vadj[i] / a.vval[i];
        break;
      }
      case Op::SqrtV: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        for (std::size_t i = 0; i < n.vval.size(); ++i)
          a.vadj[i] += n.vadj[i] * 0.5 / n.vval[i];
        break;
      }
      case Op::LogisticV: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        for (std::size_t i = 0; i < n.vval.size(); ++i)
          a.vadj[i] += n.vadj[i] * n.vval[i] * (1.0 - n.vval[i]);
        break;
      }
      case Op::MatVec: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        std::vector<double> tmp(a.vval.size());
        kernels::ops().matvec_t(n.cmat.raw(), n.cmat.prows, n.cmat.pcols,
                                n.vadj.data(), tmp.data());
        for (std::size_t i = 0; i < tmp.size(); ++i) a.vadj[i] += tmp[i];
        break;
      }
      case Op::MatVecT: {
        if (n.vadj.empty()) break;
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        std::vector<double> tmp(a.vval.size());
        kernels::ops().matvec(n.cmat.raw(), n.cmat.prows, n.cmat.pcols,
                              n.vadj.data(), tmp.data());
        for (std::size_t i = 0; i < tmp.size(); ++i) a.vadj[i] += tmp[i];
        break;
      }
      case Op::SumV: {
        TapeNode& a = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(a);
        for (std::size_t i = 0; i < a.vval.size(); ++i) a.vadj[i] += n.sadj;
        break;
      }

      case Op::NormalLpdfSum: {
        const double sigma =
            n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].sval : n.x1;
        const double inv_s2 = 1.0 / (sigma * sigma);
        const bool mu_scalar = n.aux == 1;
        const double* mu_vec = nullptr;
        double mu_s = 0.0;
        if (n.a >= 0) {
          const TapeNode& m = nodes_[static_cast<std::size_t>(n.a)];
          if (mu_scalar)
            mu_s = m.sval;
          else
            mu_vec = m.vval.data();
        } else {
          if (mu_scalar)
            mu_s = n.x0;
          else
            mu_vec = n.cvec2.data();
        }
        const std::size_t len = n.cvec.size();
        double ss = 0.0, dsum = 0.0;
        TapeNode* mu_node =
            n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
        if (mu_node && !mu_scalar) vadj_init(*mu_node);
        for (std::size_t i = 0; i < len; ++i) {
          const double d = n.cvec[i] - (mu_scalar ? mu_s : mu_vec[i]);
          ss += d * d;
          dsum += d;
          if (mu_node && !mu_scalar)
            mu_node->vadj[i] += n.sadj * d * inv_s2;
        }
        if (mu_node && mu_scalar) mu_node->sadj += n.sadj * dsum * inv_s2;
        if (n.b >= 0)
          nodes_[static_cast<std::size_t>(n.b)].sadj +=
              n.sadj * (-static_cast<double>(len) / sigma +
                        ss / (sigma * sigma * sigma));
        break;
      }
      case Op::BernLpmfSum: {
        TapeNode& p = nodes_[static_cast<std::size_t>(n.a)];
        const bool p_scalar = n.aux == 1;
        if (!p_scalar) vadj_init(p);
        double acc = 0.0;
        for (std::size_t i = 0; i < n.cvec.size(); ++i) {
          const double pi = p_scalar ? p.sval : p.vval[i];
          const double g = n.cvec[i] != 0.0 ? 1.0 / pi : -1.0 / (1.0 - pi);
          if (p_scalar)
            acc += g;
          else
            p.vadj[i] += n.sadj * g;
        }
        if (p_scalar) p.sadj += n.sadj * acc;
        break;
      }
      case Op::PoisLpmfSum: {
        TapeNode& lam = nodes_[static_cast<std::size_t>(n.a)];
        const bool scalar = n.aux == 1;
        if (!scalar) vadj_init(lam);
        double acc = 0.0;
        for (std::size_t i = 0; i < n.cvec.size(); ++i) {
          const double li = scalar ? lam.sval : lam.vval[i];
          const double g = n.cvec[i] / li - 1.0;
          if (scalar)
            acc += g;
          else
            lam.vadj[i] += n.sadj * g;
        }
        if (scalar) lam.sadj += n.sadj * acc;
        break;
      }
      case Op::MvIsoLpdf: {
        const double sigma =
            n.c >= 0 ? nodes_[static_cast<std::size_t>(n.c)].sval : n.x2;
        const double inv_s2 = 1.0 / (sigma * sigma);
        const double* xv = n.a >= 0
                               ? nodes_[static_cast<std::size_t>(n.a)].vval.data()
                               : n.cvec.data();
        const double* mv = n.b >= 0
                               ? nodes_[static_cast<std::size_t>(n.b)].vval.data()
                               : n.cvec2.data();
        const std::size_t len =
            n.a >= 0 ? nodes_[static_cast<std::size_t>(n.a)].vval.size()
                     : n.cvec.size();
        TapeNode* xn = n.a >= 0 ? &nodes_[static_cast<std::size_t>(n.a)] : nullptr;
        TapeNode* mn = n.b >= 0 ? &nodes_[static_cast<std::size_t>(n.b)] : nullptr;
        if (xn) vadj_init(*xn);
        if (mn) vadj_init(*mn);
        double ss = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
          const double d = xv[i] - mv[i];
          ss += d * d;
          if (xn) xn->vadj[i] += n.sadj * (-d * inv_s2);
          if (mn) mn->vadj[i] += n.sadj * (d * inv_s2);
        }
        if (n.c >= 0)
          nodes_[static_cast<std::size_t>(n.c)].sadj +=
              n.sadj * (-static_cast<double>(len) / sigma +
                        ss / (sigma * sigma * sigma));
        break;
      }
      case Op::CatLpmf: {
        TapeNode& p = nodes_[static_cast<std::size_t>(n.a)];
        vadj_init(p);
        const auto k = static_cast<std::size_t>(n.aux - 1);
        if (n.aux >= 1 && k < p.vval.size())
          p.vadj[k] += n.sadj / p.vval[k];
        break;
      }
      case Op::DirLpdf: {
        const double* xv = n.a >= 0
                               ? nodes_[static_cast<std::size_t>(n.a)].vval.data()
                               : n.cvec.data();
        const std::size_t len = n.cvec2.size();
        if (n.a >= 0) {
          TapeNode& x = nodes_[static_cast<std::size_t>(n.a)];
          vadj_init(x);
          for (std::size_t i = 0; i < len; ++i)
            x.vadj[i] += n.sadj * (n.cvec2[i] - 1.0) / xv[i];
        }
        if (n.b >= 0) {
          TapeNode& al = nodes_[static_cast<std::size_t>(n.b)];
          vadj_init(al);
          double asum = 0.0;
          for (std::size_t i = 0; i < len; ++i) asum += al.vval[i];
          const double dg_sum = digamma(asum);
          for (std::size_t i = 0; i < len; ++i)
            al.vadj[i] +=
                n.sadj * (std::log(xv[i]) - digamma(al.vval[i]) + dg_sum);
        }
        break;
      }
    }
  }
}

GradientResult gradient_logp(const Model& m, TypedTrace& t, const Context& ctx,
                             const std::vector<double>& theta, Tape& tape) {
  if (t.int_size() > 0)
    throw NotDifferentiableError(
        "model has discrete parameters; gradients are undefined");
  t.unflatten(theta);
  tape.clear();
  GradientResult res;
  try {
    const TracedLogp tl = evaluate_traced(m, t, ctx, tape);
    res.logp = tl.logp;
    if (!std::isfinite(res.logp)) {
      res.logp = kNegInf;
      return res;
    }
    res.grad.assign(theta.size(), 0.0);
    tape.reverse(tl.node, res.grad);
  } catch (const ModelDomainError&) {
    res.logp = kNegInf;
    res.grad.clear();
  }
  return res;
}

GradientResult gradient_logp(const Model& m, TypedTrace& t, const Context& ctx,
                             const std::vector<double>& theta) {
  Tape tape;
  return gradient_logp(m, t, ctx, theta, tape);
}

std::vector<double> finite_diff_gradient(const Model& m, TypedTrace& t,
                                         const Context& ctx,
                                         const std::vector<double>& theta,
                                         double h) {
  Rng dummy(0);
  std::vector<double> grad(theta.size());
  std::vector<double> point = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    point[i] = theta[i] + h;
    t.unflatten(point);
    const double fp = evaluate(m, t, ctx, dummy);
    point[i] = theta[i] - h;
    t.unflatten(point);
    const double fm = evaluate(m, t, ctx, dummy);
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvalError("finite-difference stencil hit a -inf log density");
    grad[i] = (fp - fm) / (2.0 * h);
    point[i] = theta[i];
  }
  t.unflatten(theta);
  return grad;
}

}  // namespace ppl
