#include "ppl/interpreter.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "ppl/autodiff.hpp"
#include "ppl/distributions.hpp"
#include "ppl/kernels.hpp"

namespace ppl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::string at(SourcePos pos) {
  return " at " + std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

void collect_tilde_syms(const std::vector<Stmt>& body,
                        std::set<std::string>& out) {
  for (const Stmt& s : body) {
    if (const auto* t = std::get_if<TildeStmt>(&s.node)) {
      out.insert(t->lhs.symbol);
    } else if (const auto* dt = std::get_if<DotTildeStmt>(&s.node)) {
      out.insert(dt->lhs.symbol);
    } else if (const auto* f = std::get_if<IfStmt>(&s.node)) {
      collect_tilde_syms(f->body, out);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Model

Model::Model(std::shared_ptr<const ModelDecl> decl,
             std::map<std::string, Value> args)
    : decl_(std::move(decl)), args_(std::move(args)) {
  std::set<std::string> expected(decl_->params.begin(), decl_->params.end());
  std::string missing, extra;
  for (const auto& p : expected)
    if (args_.count(p) == 0) missing += (missing.empty() ? "" : ", ") + p;
  for (const auto& [k, v] : args_)
    if (expected.count(k) == 0) extra += (extra.empty() ? "" : ", ") + k;
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "model '" + decl_->name + "' argument mismatch";
    if (!missing.empty()) msg += "; missing: " + missing;
    if (!extra.empty()) msg += "; unexpected: " + extra;
    throw EvalError(msg);
  }

  collect_tilde_syms(decl_->body, tilde_syms_);
  for (const auto& sym : tilde_syms_) {
    auto it = args_.find(sym);
    if (it != args_.end() && !it->second.is_missing()) observed_.insert(sym);
  }
}

const Value& Model::arg(const std::string& name) const {
  auto it = args_.find(name);
  if (it == args_.end())
    throw EvalError("model '" + decl_->name + "' has no argument '" + name +
                    "'");
  return it->second;
}

std::set<std::string> Model::parameter_symbols() const {
  std::set<std::string> out;
  for (const auto& sym : tilde_syms_)
    if (observed_.count(sym) == 0) out.insert(sym);
  return out;
}

Model instantiate(ModelDecl decl, std::map<std::string, Value> args) {
  return Model(std::make_shared<const ModelDecl>(std::move(decl)),
               std::move(args));
}

Model instantiate(std::shared_ptr<const ModelDecl> decl,
                  std::map<std::string, Value> args) {
  return Model(std::move(decl), std::move(args));
}

std::set<std::string> tilde_symbols(const ModelDecl& decl) {
  std::set<std::string> out;
  collect_tilde_syms(decl.body, out);
  return out;
}

// -------------------------------------------------------------- Presets

bool Presets::lookup(const VarName& vn, std::size_t dist_dim,
                     Value& out) const {
  const std::string key = varname_to_string(vn);
  auto it = byname_.find(key);
  if (it != byname_.end()) {
    out = it->second;
    return true;
  }
  if (vn.path.empty()) {
    // assemble "w" from presets w[1]..w[dim]
    std::vector<double> vals;
    vals.reserve(dist_dim);
    for (std::size_t i = 1; i <= dist_dim; ++i) {
      auto el = byname_.find(vn.symbol + "[" + std::to_string(i) + "]");
      if (el == byname_.end()) return false;
      vals.push_back(el->second.as_real());
    }
    if (vals.empty()) return false;
    out = dist_dim == 1 ? Value(vals[0]) : Value(std::move(vals));
    return true;
  }
  // element of a whole-vector binding: "lam[i]" through "lam"
  if (vn.path.size() == 1 && vn.path[0].size() == 1 && !vn.path[0][0].is_all()) {
    auto whole = byname_.find(vn.symbol);
    if (whole == byname_.end()) return false;
    const Value& w = whole->second;
    const auto i = static_cast<std::size_t>(vn.path[0][0].value);
    if (!w.is_vector() || i < 1 || i > w.vec_len()) return false;
    out = Value(w.vec_at(i - 1));
    return true;
  }
  return false;
}

// --------------------------------------------------------------- TV ops

namespace {

struct TV {
  Value v;
  int node = -1;
  bool traced() const { return node >= 0; }
};

// flat offsets of typed-trace entries, for tape inputs
struct FlatLayout {
  std::unordered_map<std::uint64_t, std::pair<std::size_t, std::size_t>> map;
  static std::uint64_t key(Slot s) {
    return (static_cast<std::uint64_t>(s.a) << 32) | s.b;
  }
  void build(const TypedTrace& t) {
    struct Ref {
      int order;
      std::size_t g, i, len;
    };
    std::vector<Ref> refs;
    const auto& groups = t.groups();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].et != ElemType::Real) continue;
      for (std::size_t i = 0; i < groups[g].names.size(); ++i)
        refs.push_back({groups[g].order[i], g, i, groups[g].ranges[i].second});
    }
    std::sort(refs.begin(), refs.end(),
              [](const Ref& a, const Ref& b) { return a.order < b.order; });
    std::size_t pos = 0;
    for (const auto& r : refs) {
      Slot s;
      s.a = static_cast<std::uint32_t>(r.g);
      s.b = static_cast<std::uint32_t>(r.i);
      map.emplace(key(s), std::make_pair(pos, r.len));
      pos += r.len;
    }
  }
};

template <class TraceT>
class Evaluator {
 public:
  Evaluator(const Model& m, TraceT& t, const Context& ctx, Rng& rng,
            Tape* tape, const EvalOptions& opts)
      : m_(m), t_(t), ctx_(ctx), rng_(rng), tape_(tape), opts_(opts) {
    if (tape_) {
      if constexpr (std::is_same_v<TraceT, TypedTrace>) {
        layout_.build(t_);
      } else {
        throw EvalError("tape evaluation requires a typed trace");
      }
      tape_->begin_forward();
      TapeNode zero;
      zero.kind = Op::Const;
      zero.sval = 0.0;
      acc_node_ = tape_->push(std::move(zero));
    }
  }

  double run() {
    t_.begin_evaluation();
    for (const Stmt& s : m_.decl().body)
      if (!exec(s)) break;
    return t_.logp();
  }

  int logp_node() const { return halted_ ? -1 : acc_node_; }

 private:
  // ----------------------------------------------------------- tape aux

  int const_scalar_node(double v) {
    TapeNode n;
    n.kind = Op::Const;
    n.sval = v;
    return tape_->push(std::move(n));
  }

  int constify(const TV& x) {
    if (x.traced()) return x.node;
    TapeNode n;
    n.kind = Op::Const;
    if (x.v.is_numeric_scalar()) {
      n.sval = x.v.as_real();
    } else {
      n.is_vec = true;
      n.vval = x.v.to_real_vector();
    }
    return tape_->push(std::move(n));
  }

  TV scalar_node(Op kind, int a, int b, double val, double p0, double p1) {
    TapeNode n;
    n.kind = kind;
    n.a = a;
    n.b = b;
    n.sval = val;
    n.p0 = p0;
    n.p1 = p1;
    return TV{Value(val), tape_->push(std::move(n))};
  }

  TV vec_node(TapeNode&& n) {
    n.is_vec = true;
    const int id = tape_->push(std::move(n));
    auto& nd = tape_->node(id);
    return TV{Value(RealSpan{nd.vval.data(), nd.vval.size()}), id};
  }

  // ------------------------------------------------------- environment

  const TV* lookup_env(const std::string& name) {
    auto it = locals_.find(name);
    if (it != locals_.end()) return &it->second;
    auto ait = m_.args().find(name);
    if (ait == m_.args().end()) return nullptr;
    auto [cit, inserted] = arg_cache_.try_emplace(name);
    if (inserted) cit->second = TV{view_of(ait->second), -1};
    return &cit->second;
  }

  // cheap view of a data argument (spans for real vectors)
  static Value view_of(const Value& v) {
    if (v.kind() == Value::Kind::RealVec)
      return Value(RealSpan{v.real_data(), v.vec_len()});
    return v;
  }

  // --------------------------------------------------------- statements

  bool exec(const Stmt& s) {
    if (opts_.stats) ++opts_.stats->statements_executed;
    if (std::holds_alternative<RejectStmt>(s.node)) {
      t_.set_logp_neg_inf();
      halted_ = true;
      if (opts_.stats) opts_.stats->hit_reject = true;
      return false;
    }
    if (const auto* a = std::get_if<AssignStmt>(&s.node)) {
      locals_[a->target] = eval(*a->value);
      return true;
    }
    if (const auto* t = std::get_if<TildeStmt>(&s.node)) {
      exec_tilde(*t, s.pos);
      return true;
    }
    if (const auto* dt = std::get_if<DotTildeStmt>(&s.node)) {
      exec_dot_tilde(*dt, s.pos);
      return true;
    }
    const auto& f = std::get<IfStmt>(s.node);
    TV cond = eval(*f.cond);
    if (!cond.v.is_bool())
      throw EvalError("if condition must be a boolean" + at(s.pos));
    if (cond.v.as_bool()) {
      for (const Stmt& inner : f.body)
        if (!exec(inner)) return false;
    }
    return true;
  }

  struct DistSpec {
    std::string name;
    std::vector<TV> args;
    SourcePos pos;
  };

  DistSpec eval_dist_call(const Expr& e) {
    DistSpec ds;
    ds.pos = e.pos;
    if (const auto* call = std::get_if<CallExpr>(&e.node)) {
      ds.name = call->name;
      for (const auto& a : call->args) ds.args.push_back(eval(*a));
    } else if (const auto* bc = std::get_if<BroadcastCallExpr>(&e.node)) {
      ds.name = bc->name;
      for (const auto& a : bc->args) ds.args.push_back(eval(*a));
    } else {
      throw EvalError("tilde right-hand side is not a distribution call" +
                      at(e.pos));
    }
    return ds;
  }

  Distribution make_dist(const DistSpec& ds, const std::vector<Value>& args) {
    const auto scalar = [&](std::size_t i) { return args[i].as_real(); };
    if (ds.name == "Normal") return Distribution::normal(scalar(0), scalar(1));
    if (ds.name == "MvNormal")
      return Distribution::mvnormal_iso(args[0].to_real_vector(), scalar(1));
    if (ds.name == "Gamma") return Distribution::gamma(scalar(0), scalar(1));
    if (ds.name == "Beta") return Distribution::beta(scalar(0), scalar(1));
    if (ds.name == "Bernoulli") return Distribution::bernoulli(scalar(0));
    if (ds.name == "Poisson") return Distribution::poisson(scalar(0));
    if (ds.name == "Categorical")
      return Distribution::categorical(args[0].to_real_vector());
    if (ds.name == "Dirichlet")
      return Distribution::dirichlet(args[0].to_real_vector());
    throw EvalError("unknown distribution '" + ds.name + "'" + at(ds.pos));
  }

  VarName lhs_varname(const LValue& lv) {
    VarName vn(lv.symbol);
    if (!lv.indices.empty()) {
      IndexGroup g;
      for (const auto& ie : lv.indices) {
        TV idx = eval(*ie);
        if (!idx.v.is_int() || idx.v.as_int() < 1)
          throw EvalError("indices must be positive integers" + at(lv.pos));
        g.push_back(IndexAtom{idx.v.as_int()});
      }
      vn.path.push_back(std::move(g));
    }
    return vn;
  }

  void exec_tilde(const TildeStmt& stmt, SourcePos pos) {
    DistSpec ds = eval_dist_call(*stmt.dist);
    std::vector<Value> argv;
    argv.reserve(ds.args.size());
    for (const auto& a : ds.args) argv.push_back(a.v);
    Distribution d = make_dist(ds, argv);

    const VarName vn = lhs_varname(stmt.lhs);
    if (m_.is_observed(stmt.lhs.symbol)) {
      const TV* data = lookup_env(stmt.lhs.symbol);
      TV x = *data;
      if (!vn.path.empty()) x = index_value(x, vn.path[0], pos);
      observe(ds, d, x);
      return;
    }
    TV val = assume(vn, ds, d, pos);
    if (vn.path.empty()) locals_[stmt.lhs.symbol] = std::move(val);
  }

  void exec_dot_tilde(const DotTildeStmt& stmt, SourcePos pos) {
    if (!stmt.lhs.indices.empty())
      throw EvalError("broadcast tilde left-hand side must be a bare identifier" +
                      at(pos));
    DistSpec ds = eval_dist_call(*stmt.dist);

    if (m_.is_observed(stmt.lhs.symbol)) {
      const TV* data = lookup_env(stmt.lhs.symbol);
      if (!data->v.is_vector())
        throw EvalError("broadcast tilde observation must be a vector" +
                        at(pos));
      broadcast_observe(ds, *data, pos);
      return;
    }
    broadcast_assume(stmt.lhs.symbol, ds, pos);
  }

  // broadcast argument access: scalars repeat, vectors must match n
  std::size_t broadcast_len(const DistSpec& ds, std::size_t lhs_len,
                            SourcePos pos, bool lhs_known) {
    std::size_t n = lhs_known ? lhs_len : 0;
    for (const auto& a : ds.args) {
      if (a.v.is_numeric_scalar()) continue;
      if (!a.v.is_vector())
        throw EvalError("broadcast arguments must be scalars or vectors" +
                        at(pos));
      const std::size_t len = a.v.vec_len();
      if (n == 0) n = len;
      if (len != n)
        throw EvalError("broadcast length mismatch: expected " +
                        std::to_string(n) + ", got " + std::to_string(len) +
                        at(pos));
    }
    if (n == 0)
      throw EvalError("cannot determine broadcast length" + at(pos));
    return n;
  }

  Value arg_elem(const TV& a, std::size_t i) {
    if (a.v.is_numeric_scalar()) return a.v;
    return Value(a.v.vec_at(i));
  }

  void broadcast_observe(const DistSpec& ds, const TV& data, SourcePos pos) {
    const std::size_t n = broadcast_len(ds, data.v.vec_len(), pos, true);
    if (n == 0) return;

    if (ds.name == "Normal" && ds.args[1].v.is_numeric_scalar()) {
      observe_normal_fused(ds, data, n, pos);
      return;
    }
    if (ds.name == "Bernoulli") {
      observe_bernoulli_fused(ds, data, n, pos);
      return;
    }
    if (ds.name == "Poisson") {
      observe_poisson_fused(ds, data, n, pos);
      return;
    }

    // generic element-wise path
    for (std::size_t i = 0; i < n; ++i) {
      DistSpec di;
      di.name = ds.name;
      di.pos = ds.pos;
      std::vector<Value> argv;
      for (const auto& a : ds.args) {
        di.args.push_back(TV{arg_elem(a, i), element_node(a, i)});
        argv.push_back(di.args.back().v);
      }
      Distribution d = make_dist(ds, argv);
      observe(di, d, TV{Value(data.v.vec_at(i)), -1});
    }
  }

  // Sum_i log N(y_i | mu_i, sigma) with scalar sigma.
  void observe_normal_fused(const DistSpec& ds, const TV& data, std::size_t n,
                            SourcePos pos) {
    const TV& mu = ds.args[0];
    const TV& sg = ds.args[1];
    const double sigma = sg.v.as_real();
    if (!(std::isfinite(sigma) && sigma > 0.0))
      throw ModelDomainError("Normal: sigma must be positive" + at(pos));

    std::vector<double> ybuf = data.v.to_real_vector();
    const auto& k = kernels::ops();
    double ss;
    const bool mu_scalar = mu.v.is_numeric_scalar();
    std::vector<double> mubuf;
    if (mu_scalar) {
      ss = k.sq_dev_sum(ybuf.data(), mu.v.as_real(), n);
    } else {
      if (const double* p = mu.v.real_data()) {
        ss = k.sq_dev_sum_v(ybuf.data(), p, n);
      } else {
        mubuf = mu.v.to_real_vector();
        ss = k.sq_dev_sum_v(ybuf.data(), mubuf.data(), n);
      }
    }
    const double term =
        -0.5 * ss / (sigma * sigma) -
        static_cast<double>(n) * (std::log(sigma) + kHalfLog2Pi);

    int node = -1;
    if (tape_ && (mu.traced() || sg.traced())) {
      TapeNode tn;
      tn.kind = Op::NormalLpdfSum;
      tn.cvec = std::move(ybuf);
      tn.a = mu.traced() ? mu.node : -1;
      tn.b = sg.traced() ? sg.node : -1;
      if (!mu.traced()) {
        if (mu_scalar)
          tn.x0 = mu.v.as_real();
        else
          tn.cvec2 = mu.v.to_real_vector();
      }
      tn.x1 = sigma;
      tn.aux = mu_scalar ? 1 : 0;
      tn.sval = term;
      node = tape_->push(std::move(tn));
    }
    observe_term(term, node);
  }

  void observe_bernoulli_fused(const DistSpec& ds, const TV& data,
                               std::size_t n, SourcePos pos) {
    const TV& p = ds.args[0];
    std::vector<double> ybuf = data.v.to_real_vector();
    for (double y : ybuf)
      if (y != 0.0 && y != 1.0)
        throw EvalError("Bernoulli observation must be 0 or 1" + at(pos));

    std::vector<double> pbuf;
    const double* pdata;
    if (p.v.is_numeric_scalar()) {
      pbuf.assign(n, p.v.as_real());
      pdata = pbuf.data();
    } else if (const double* raw = p.v.real_data()) {
      pdata = raw;
    } else {
      pbuf = p.v.to_real_vector();
      pdata = pbuf.data();
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!(pdata[i] >= 0.0 && pdata[i] <= 1.0))
        throw ModelDomainError("Bernoulli: p must be in [0,1]" + at(pos));

    const double term = kernels::ops().bernoulli_lpmf_sum(pdata, ybuf.data(), n);

    int node = -1;
    if (tape_ && p.traced()) {
      TapeNode tn;
      tn.kind = Op::BernLpmfSum;
      tn.cvec = std::move(ybuf);
      tn.a = p.node;
      tn.aux = p.v.is_numeric_scalar() ? 1 : 0;
      tn.sval = term;
      node = tape_->push(std::move(tn));
    }
    observe_term(term, node);
  }

  void observe_poisson_fused(const DistSpec& ds, const TV& data, std::size_t n,
                             SourcePos pos) {
    const TV& lam = ds.args[0];
    std::vector<double> ybuf = data.v.to_real_vector();
    for (double y : ybuf)
      if (!(y >= 0.0) || std::floor(y) != y)
        throw EvalError("Poisson observation must be a nonnegative integer" +
                        at(pos));

    std::vector<double> lbuf;
    const double* ldata;
    if (lam.v.is_numeric_scalar()) {
      lbuf.assign(n, lam.v.as_real());
      ldata = lbuf.data();
    } else if (const double* raw = lam.v.real_data()) {
      ldata = raw;
    } else {
      lbuf = lam.v.to_real_vector();
      ldata = lbuf.data();
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!(ldata[i] > 0.0))
        throw ModelDomainError("Poisson: lambda must be positive" + at(pos));

    double lgam = 0.0;
    for (std::size_t i = 0; i < n; ++i) lgam += std::lgamma(ybuf[i] + 1.0);
    const double term =
        kernels::ops().poisson_partial_sum(ldata, ybuf.data(), n) - lgam;

    int node = -1;
    if (tape_ && lam.traced()) {
      TapeNode tn;
      tn.kind = Op::PoisLpmfSum;
      tn.cvec = std::move(ybuf);
      tn.a = lam.node;
      tn.aux = lam.v.is_numeric_scalar() ? 1 : 0;
      tn.x0 = lgam;
      tn.sval = term;
      node = tape_->push(std::move(tn));
    }
    observe_term(term, node);
  }

  // element of a (possibly traced) broadcast argument
  int element_node(const TV& a, std::size_t i) {
    if (!tape_ || !a.traced()) return -1;
    if (a.v.is_numeric_scalar()) return a.node;
    TapeNode n;
    n.kind = Op::IndexV;
    n.a = a.node;
    n.aux = static_cast<std::int64_t>(i);
    n.sval = a.v.vec_at(i);
    n.p0 = 1.0;
    return tape_->push(std::move(n));
  }

  void broadcast_assume(const std::string& symbol, const DistSpec& ds,
                        SourcePos pos) {
    const std::size_t n = broadcast_len(ds, 0, pos, false);
    std::vector<double> vals(n);
    std::vector<int> elem_nodes;
    bool any_traced = false;

    for (std::size_t i = 0; i < n; ++i) {
      DistSpec di;
      di.name = ds.name;
      di.pos = ds.pos;
      std::vector<Value> argv;
      for (const auto& a : ds.args) {
        di.args.push_back(TV{arg_elem(a, i), element_node(a, i)});
        argv.push_back(di.args.back().v);
      }
      Distribution d = make_dist(ds, argv);
      if (d.is_multivariate())
        throw EvalError("broadcast tilde requires a univariate distribution" +
                        at(pos));
      VarName vn(symbol);
      vn.path.push_back({IndexAtom{static_cast<std::int64_t>(i + 1)}});
      TV vi = assume(vn, di, d, pos);
      vals[i] = vi.v.as_real();
      if (vi.traced()) any_traced = true;
      elem_nodes.push_back(vi.node);
    }

    if (tape_ && any_traced) {
      TapeNode tn;
      tn.kind = Op::Pack;
      for (std::size_t i = 0; i < n; ++i) {
        if (elem_nodes[i] < 0) elem_nodes[i] = const_scalar_node(vals[i]);
        tn.parents.push_back(elem_nodes[i]);
      }
      tn.vval = vals;
      locals_[symbol] = vec_node(std::move(tn));
    } else {
      locals_[symbol] = TV{Value(std::move(vals)), -1};
    }
  }

  // ------------------------------------------------------ tilde kernels

  void acc(double v, int node) {
    t_.acc_logp(v);
    if (tape_ && !halted_) {
      const int term = node >= 0 ? node : const_scalar_node(v);
      const auto& a = tape_->node(acc_node_);
      const auto& b = tape_->node(term);
      TapeNode n;
      n.kind = Op::AddSS;
      n.a = acc_node_;
      n.b = term;
      n.sval = a.sval + b.sval;
      n.p0 = 1.0;
      n.p1 = 1.0;
      acc_node_ = tape_->push(std::move(n));
    }
  }

  void assume_term(double v, int node) {
    if (opts_.stats) ++opts_.stats->assumes;
    if (ctx_.base == Context::Base::Likelihood) return;
    acc(v, node);
  }

  void observe_term(double v, int node) {
    if (opts_.stats) ++opts_.stats->observes;
    if (ctx_.base == Context::Base::Prior) return;
    if (ctx_.minibatch) {
      const double w = ctx_.weight;
      int n2 = -1;
      if (tape_ && node >= 0) {
        TapeNode n;
        n.kind = Op::MulSS;
        n.a = node;
        n.b = const_scalar_node(w);
        n.sval = tape_->node(node).sval * w;
        n.p0 = w;
        n.p1 = tape_->node(node).sval;
        n2 = tape_->push(std::move(n));
      }
      acc(w * v, n2);
      return;
    }
    acc(v, node);
  }

  void observe(const DistSpec& ds, const Distribution& d, const TV& x) {
    const double term = logpdf(d, x.v);
    int node = -1;
    if (tape_) node = density_node(ds, d, x, term);
    observe_term(term, node);
  }

  // scalar/vector log-density node for traced parameters or arguments;
  // -1 when nothing is traced
  int density_node(const DistSpec& ds, const Distribution& d, const TV& x,
                   double term) {
    bool traced = x.traced();
    for (const auto& a : ds.args) traced |= a.traced();
    if (!traced) return -1;

    TapeNode n;
    n.sval = term;
    const auto set_sc = [&](int i, const TV& tv, double& cslot) {
      const int parent = tv.traced() ? tv.node : -1;
      if (i == 0) n.a = parent;
      if (i == 1) n.b = parent;
      if (i == 2) n.c = parent;
      cslot = tv.v.is_numeric_scalar() ? tv.v.as_real() : 0.0;
    };

    switch (d.kind()) {
      case Distribution::Kind::Normal: {
        n.kind = Op::NormalLpdf;
        set_sc(0, x, n.x0);
        set_sc(1, ds.args[0], n.x1);
        set_sc(2, ds.args[1], n.x2);
        const auto& p = d.as<NormalDist>();
        const double z = (n.x0 - p.mu) / p.sigma;
        n.p0 = -z / p.sigma;
        n.p1 = z / p.sigma;
        n.p2 = -1.0 / p.sigma + z * z / p.sigma;
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::Gamma: {
        n.kind = Op::GammaLpdf;
        set_sc(0, x, n.x0);
        set_sc(1, ds.args[0], n.x1);
        set_sc(2, ds.args[1], n.x2);
        const auto& p = d.as<GammaDist>();
        if (n.x0 > 0.0) {
          n.p0 = (p.shape - 1.0) / n.x0 - 1.0 / p.scale;
          n.p1 = -digamma(p.shape) - std::log(p.scale) + std::log(n.x0);
          n.p2 = -p.shape / p.scale + n.x0 / (p.scale * p.scale);
        }
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::Beta: {
        n.kind = Op::BetaLpdf;
        set_sc(0, x, n.x0);
        set_sc(1, ds.args[0], n.x1);
        set_sc(2, ds.args[1], n.x2);
        const auto& p = d.as<BetaDist>();
        if (n.x0 > 0.0 && n.x0 < 1.0) {
          n.p0 = (p.alpha - 1.0) / n.x0 - (p.beta - 1.0) / (1.0 - n.x0);
          n.p1 = std::log(n.x0) - digamma(p.alpha) + digamma(p.alpha + p.beta);
          n.p2 = std::log1p(-n.x0) - digamma(p.beta) + digamma(p.alpha + p.beta);
        }
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::Bernoulli: {
        n.kind = Op::BernLpmf;
        n.a = ds.args[0].traced() ? ds.args[0].node : -1;
        n.x0 = x.v.as_real();
        const double p = d.as<BernoulliDist>().p;
        n.p0 = x.v.as_real() != 0.0 ? 1.0 / p : -1.0 / (1.0 - p);
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::Poisson: {
        n.kind = Op::PoisLpmf;
        n.a = ds.args[0].traced() ? ds.args[0].node : -1;
        n.x0 = x.v.as_real();
        const double lam = d.as<PoissonDist>().lambda;
        n.p0 = n.x0 / lam - 1.0;
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::Categorical: {
        n.kind = Op::CatLpmf;
        n.a = ds.args[0].traced() ? ds.args[0].node : -1;
        n.aux = static_cast<std::int64_t>(x.v.as_real());
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::MvNormalIso: {
        n.kind = Op::MvIsoLpdf;
        n.a = x.traced() ? x.node : -1;
        if (!x.traced()) n.cvec = x.v.to_real_vector();
        n.b = ds.args[0].traced() ? ds.args[0].node : -1;
        if (!ds.args[0].traced()) n.cvec2 = ds.args[0].v.to_real_vector();
        n.c = ds.args[1].traced() ? ds.args[1].node : -1;
        n.x2 = d.as<MvNormalIsoDist>().sigma;
        return tape_->push(std::move(n));
      }
      case Distribution::Kind::Dirichlet: {
        n.kind = Op::DirLpdf;
        n.a = x.traced() ? x.node : -1;
        if (!x.traced()) n.cvec = x.v.to_real_vector();
        n.b = ds.args[0].traced() ? ds.args[0].node : -1;
        n.cvec2 = d.as<DirichletDist>().alpha;
        return tape_->push(std::move(n));
      }
    }
    return -1;
  }

  TV assume(const VarName& vn, const DistSpec& ds, const Distribution& d,
            SourcePos pos) {
    Slot slot;
    if (t_.lookup(vn, slot)) {
      t_.set_dist(slot, d);
      if (t_.linked(slot)) {
        if constexpr (std::is_same_v<TraceT, TypedTrace>) {
          return assume_linked(vn, ds, d, slot);
        } else {
          throw StateError("linked entries require a typed trace");
        }
      }
      Value stored = t_.read(slot);
      TV x{stored, -1};
      if (tape_) x.node = input_node(slot, stored);
      const double term = logpdf(d, x.v);
      assume_term(term, tape_ ? density_node(ds, d, x, term) : -1);
      return x;
    }

    // first visit: preset value or prior draw
    if (tape_)
      throw EvalError("tape evaluation over an incomplete trace: " +
                      varname_to_string(vn));
    Value x;
    bool from_preset = false;
    if (opts_.presets) from_preset = opts_.presets->lookup(vn, d.dim(), x);
    if (!from_preset) {
      x = sample(d, rng_);
    } else if (!d.is_discrete()) {
      // store continuous parameters as reals regardless of how the
      // binding was written
      if (x.is_int()) x = Value(x.as_real());
      if (x.kind() == Value::Kind::IntVec) x = Value(x.to_real_vector());
    } else if (d.is_discrete() && x.is_real() &&
               std::floor(x.as_real()) == x.as_real()) {
      x = Value(static_cast<std::int64_t>(x.as_real()));
    }
    if (d.is_multivariate() && (!x.is_vector() || x.vec_len() != d.dim()))
      throw EvalError("value bound to " + varname_to_string(vn) +
                      " has wrong length" + at(pos));
    t_.insert(vn, d, x);
    const double term = logpdf(d, x);
    assume_term(term, -1);
    return TV{std::move(x), -1};
  }

  int input_node(Slot slot, const Value& stored) {
    if (!stored.is_numeric_scalar() && !stored.is_vector()) return -1;
    if (stored.is_int() || stored.kind() == Value::Kind::IntVec) return -1;
    auto it = layout_.map.find(FlatLayout::key(slot));
    if (it == layout_.map.end()) return -1;
    TapeNode n;
    n.kind = Op::Input;
    n.aux = static_cast<std::int64_t>(it->second.first);
    if (stored.is_numeric_scalar()) {
      n.sval = stored.as_real();
    } else {
      n.is_vec = true;
      n.vval = stored.to_real_vector();
    }
    return tape_->push(std::move(n));
  }

  // linked entry: invert the bijector on the fly and add the log-det
  // jacobian so the accumulator tracks the unconstrained density
  TV assume_linked(const VarName& vn, const DistSpec& ds, const Distribution& d,
                   Slot slot) {
    TypedTrace& tt = t_;
    const auto& g = tt.groups()[slot.a];
    const auto [offset, len] = g.ranges[slot.b];
    const double* y = g.rbuf.data() + offset;
    const Bijector b = bijector_of(d);

    if (!tape_) {
      double term;
      Value x;
      switch (b.kind()) {
        case Bijector::Kind::Identity: {
          Value xv = tt.read(slot);
          term = logpdf(d, xv);
          x = std::move(xv);
          break;
        }
        case Bijector::Kind::Log: {
          const double xs = std::exp(y[0]);
          term = logpdf(d, Value(xs)) + y[0];
          x = Value(xs);
          break;
        }
        case Bijector::Kind::Logit: {
          const double xs = 1.0 / (1.0 + std::exp(-y[0]));
          term = logpdf(d, Value(xs)) + (std::log(xs) + std::log1p(-xs));
          x = Value(xs);
          break;
        }
        case Bijector::Kind::StickBreaking: {
          std::vector<double> xv = bijector_inverse(b, y, len);
          const double lj = bijector_logjac(b, y, len);
          term = logpdf(d, Value(xv)) + lj;
          x = Value(std::move(xv));
          break;
        }
      }
      assume_term(term, -1);
      return TV{std::move(x), -1};
    }

    // tape path: same arithmetic, recorded
    const int yin = input_node(slot, tt.read(slot));
    TV x;
    TV logjac{Value(0.0), -1};
    bool has_jac = true;
    switch (b.kind()) {
      case Bijector::Kind::Identity: {
        x = TV{tt.read(slot), yin};
        has_jac = false;
        break;
      }
      case Bijector::Kind::Log: {
        const double xs = std::exp(y[0]);
        x = scalar_node(Op::ExpS, yin, -1, xs, xs, 0.0);
        logjac = TV{Value(y[0]), yin};
        break;
      }
      case Bijector::Kind::Logit: {
        const double xs = 1.0 / (1.0 + std::exp(-y[0]));
        x = scalar_node(Op::LogisticS, yin, -1, xs, xs * (1.0 - xs), 0.0);
        TV lx = scalar_node(Op::LogS, x.node, -1, std::log(xs), 1.0 / xs, 0.0);
        TV l1p = scalar_node(Op::Log1pNegS, x.node, -1, std::log1p(-xs),
                             -1.0 / (1.0 - xs), 0.0);
        logjac = scalar_node(Op::AddSS, lx.node, l1p.node,
                             lx.v.as_real() + l1p.v.as_real(), 1.0, 1.0);
        break;
      }
      case Bijector::Kind::StickBreaking: {
        x = sb_inverse_traced(yin, y, len, logjac);
        break;
      }
    }
    const double lpdf = logpdf(d, x.v);
    const int lpdf_node = density_node(ds, d, x, lpdf);
    if (!has_jac) {
      assume_term(lpdf, lpdf_node);
    } else {
      const double total = lpdf + logjac.v.as_real();
      int total_node = -1;
      const int lp = lpdf_node >= 0 ? lpdf_node : const_scalar_node(lpdf);
      const int lj = logjac.traced() ? logjac.node
                                     : const_scalar_node(logjac.v.as_real());
      TapeNode n;
      n.kind = Op::AddSS;
      n.a = lp;
      n.b = lj;
      n.sval = total;
      n.p0 = 1.0;
      n.p1 = 1.0;
      total_node = tape_->push(std::move(n));
      assume_term(total, total_node);
    }
    return x;
  }

  // stick-breaking inverse as elementary traced ops; mirrors
  // bijector_inverse / bijector_logjac arithmetic exactly
  TV sb_inverse_traced(int yin, const double* y, std::size_t len, TV& logjac) {
    const std::size_t K = len + 1;
    TV r{Value(1.0), -1};
    std::vector<int> xnodes;
    std::vector<double> xvals;
    TV lj{Value(0.0), -1};
    bool lj_started = false;

    for (std::size_t k = 0; k < K - 1; ++k) {
      TV yk = scalar_node(Op::IndexV, yin, -1, y[k], 1.0, 0.0);
      tape_->node(yk.node).aux = static_cast<std::int64_t>(k);
      const double shift = std::log(static_cast<double>(K - 1 - k));
      TV ys = scalar_node(Op::SubSS, yk.node, const_scalar_node(shift),
                          y[k] - shift, 1.0, -1.0);
      const double zv = 1.0 / (1.0 + std::exp(-(y[k] - shift)));
      TV z = scalar_node(Op::LogisticS, ys.node, -1, zv, zv * (1.0 - zv), 0.0);

      // x_k = z * r
      const double rv = r.v.as_real();
      const int rnode = r.traced() ? r.node : const_scalar_node(rv);
      TV xk = scalar_node(Op::MulSS, z.node, rnode, zv * rv, rv, zv);
      xnodes.push_back(xk.node);
      xvals.push_back(xk.v.as_real());

      // logjac += log z + log1p(-z) + log r
      TV lz = scalar_node(Op::LogS, z.node, -1, std::log(zv), 1.0 / zv, 0.0);
      TV l1p = scalar_node(Op::Log1pNegS, z.node, -1, std::log1p(-zv),
                           -1.0 / (1.0 - zv), 0.0);
      TV lr = scalar_node(Op::LogS, rnode, -1, std::log(rv), 1.0 / rv, 0.0);
      TV t1 = scalar_node(Op::AddSS, lz.node, l1p.node,
                          lz.v.as_real() + l1p.v.as_real(), 1.0, 1.0);
      TV t2 = scalar_node(Op::AddSS, t1.node, lr.node,
                          t1.v.as_real() + lr.v.as_real(), 1.0, 1.0);
      if (!lj_started) {
        lj = t2;
        lj_started = true;
      } else {
        lj = scalar_node(Op::AddSS, lj.node, t2.node,
                         lj.v.as_real() + t2.v.as_real(), 1.0, 1.0);
      }

      // r *= 1 - z
      TV onem = scalar_node(Op::SubSS, const_scalar_node(1.0), z.node,
                            1.0 - zv, 1.0, -1.0);
      r = scalar_node(Op::MulSS, rnode, onem.node, rv * (1.0 - zv),
                      1.0 - zv, rv);
    }
    xnodes.push_back(r.traced() ? r.node : const_scalar_node(r.v.as_real()));
    xvals.push_back(r.v.as_real());

    logjac = lj;
    TapeNode pack;
    pack.kind = Op::Pack;
    pack.parents = std::move(xnodes);
    pack.vval = std::move(xvals);
    return vec_node(std::move(pack));
  }

  // --------------------------------------------------------- expressions

  TV eval(const Expr& e) {
    struct V {
      Evaluator& ev;
      const Expr& e;
      TV operator()(const NumberLit& n) const {
        return n.is_int ? TV{Value(n.ival), -1} : TV{Value(n.rval), -1};
      }
      TV operator()(const IdentExpr& i) const {
        const TV* found = ev.lookup_env(i.name);
        if (!found)
          throw EvalError("unbound identifier '" + i.name + "'" + at(e.pos));
        return *found;
      }
      TV operator()(const MissingLit&) const { return TV{Value(), -1}; }
      TV operator()(const IndexExpr& ix) const { return ev.eval_index(ix, e.pos); }
      TV operator()(const TransposeExpr& t) const {
        return ev.eval_transpose(*t.base, e.pos);
      }
      TV operator()(const NegExpr& n) const {
        return ev.eval_neg(ev.eval(*n.operand), e.pos);
      }
      TV operator()(const BinaryExpr& b) const {
        return ev.eval_binary(b, e.pos);
      }
      TV operator()(const CallExpr& c) const { return ev.eval_call(c, e.pos); }
      TV operator()(const BroadcastCallExpr& c) const {
        return ev.eval_broadcast(c, e.pos);
      }
      TV operator()(const VectorLit& v) const {
        return ev.eval_vector_lit(v, e.pos);
      }
    };
    return std::visit(V{*this, e}, e.node);
  }

  TV eval_index(const IndexExpr& ix, SourcePos pos) {
    TV base = eval(*ix.base);
    std::vector<std::int64_t> idx;
    for (const auto& ie : ix.indices) {
      TV t = eval(*ie);
      if (!t.v.is_int())
        throw EvalError("index must be an integer" + at(pos));
      idx.push_back(t.v.as_int());
    }
    if (base.v.is_matrix()) {
      if (idx.size() != 2)
        throw EvalError("matrix indexing needs two indices" + at(pos));
      const Matrix& m = base.v.as_matrix();
      if (idx[0] < 1 || idx[1] < 1 ||
          idx[0] > static_cast<std::int64_t>(m.rows()) ||
          idx[1] > static_cast<std::int64_t>(m.cols()))
        throw EvalError("matrix index out of bounds" + at(pos));
      return TV{Value(m.at(static_cast<std::size_t>(idx[0] - 1),
                           static_cast<std::size_t>(idx[1] - 1))),
                -1};
    }
    if (base.v.is_vector()) {
      if (idx.size() != 1)
        throw EvalError("vector indexing needs one index" + at(pos));
      if (idx[0] < 1 || idx[0] > static_cast<std::int64_t>(base.v.vec_len()))
        throw EvalError("vector index out of bounds" + at(pos));
      const std::size_t i = static_cast<std::size_t>(idx[0] - 1);
      if (base.v.kind() == Value::Kind::IntVec)
        return TV{Value(base.v.int_vec()[i]), -1};
      TV out{Value(base.v.vec_at(i)), element_node(base, i)};
      return out;
    }
    throw EvalError("cannot index a " + base.v.kind_name() + at(pos));
  }

  // indexing an observed data value through a tilde lhs like y[3]
  TV index_value(const TV& base, const IndexGroup& g, SourcePos pos) {
    if (base.v.is_vector()) {
      if (g.size() != 1)
        throw EvalError("vector indexing needs one index" + at(pos));
      const auto i = g[0].value;
      if (g[0].is_all() || i < 1 ||
          i > static_cast<std::int64_t>(base.v.vec_len()))
        throw EvalError("index out of bounds" + at(pos));
      if (base.v.kind() == Value::Kind::IntVec)
        return TV{Value(base.v.int_vec()[static_cast<std::size_t>(i - 1)]), -1};
      return TV{Value(base.v.vec_at(static_cast<std::size_t>(i - 1))), -1};
    }
    if (base.v.is_matrix()) {
      if (g.size() != 2 || g[0].is_all() || g[1].is_all())
        throw EvalError("matrix indexing needs two integer indices" + at(pos));
      const Matrix& m = base.v.as_matrix();
      if (g[0].value < 1 || g[1].value < 1 ||
          g[0].value > static_cast<std::int64_t>(m.rows()) ||
          g[1].value > static_cast<std::int64_t>(m.cols()))
        throw EvalError("matrix index out of bounds" + at(pos));
      return TV{Value(m.at(static_cast<std::size_t>(g[0].value - 1),
                           static_cast<std::size_t>(g[1].value - 1))),
                -1};
    }
    throw EvalError("cannot index a " + base.v.kind_name() + at(pos));
  }

  TV eval_transpose(const Expr& base_expr, SourcePos pos) {
    TV base = eval(base_expr);
    if (base.traced())
      throw EvalError("transpose of a traced value is not supported" + at(pos));
    if (base.v.is_matrix()) return TV{Value(base.v.as_matrix().transposed()), -1};
    if (base.v.is_vector()) {
      Matrix m(base.v.vec_len(), 1, base.v.to_real_vector());
      m.trans = true;  // row vector
      return TV{Value(std::move(m)), -1};
    }
    if (base.v.is_numeric_scalar()) return base;
    throw EvalError("cannot transpose a " + base.v.kind_name() + at(pos));
  }

  TV eval_neg(TV a, SourcePos pos) {
    if (a.v.is_int()) return TV{Value(-a.v.as_int()), -1};
    if (a.v.is_real()) {
      if (!tape_ || !a.traced()) return TV{Value(-a.v.as_real()), -1};
      return scalar_node(Op::NegS, a.node, -1, -a.v.as_real(), -1.0, 0.0);
    }
    if (a.v.is_vector()) {
      const std::size_t n = a.v.vec_len();
      std::vector<double> buf = a.v.to_real_vector();
      std::vector<double> out(n);
      kernels::ops().scale(buf.data(), -1.0, out.data(), n);
      if (!tape_ || !a.traced()) return TV{Value(std::move(out)), -1};
      TapeNode tn;
      tn.kind = Op::NegV;
      tn.a = a.node;
      tn.vval = std::move(out);
      return vec_node(std::move(tn));
    }
    throw EvalError("cannot negate a " + a.v.kind_name() + at(pos));
  }

  TV eval_binary(const BinaryExpr& b, SourcePos pos) {
    TV lhs = eval(*b.lhs);
    TV rhs = eval(*b.rhs);

    switch (b.op) {
      case BinOp::Lt:
      case BinOp::Gt:
      case BinOp::Le:
      case BinOp::Ge:
      case BinOp::Eq: {
        if (!lhs.v.is_numeric_scalar() || !rhs.v.is_numeric_scalar())
          throw EvalError("comparison needs numeric scalars" + at(pos));
        const double a = lhs.v.as_real(), c = rhs.v.as_real();
        bool r = false;
        switch (b.op) {
          case BinOp::Lt: r = a < c; break;
          case BinOp::Gt: r = a > c; break;
          case BinOp::Le: r = a <= c; break;
          case BinOp::Ge: r = a >= c; break;
          default: r = a == c; break;
        }
        return TV{Value(r), -1};
      }
      default: break;
    }

    const bool ls = lhs.v.is_numeric_scalar(), rs = rhs.v.is_numeric_scalar();
    if (ls && rs) return scalar_binary(b.op, lhs, rhs, pos);

    // vector/matrix combinations
    if (b.op == BinOp::Add || b.op == BinOp::Sub) {
      if (lhs.v.is_vector() && rhs.v.is_vector())
        return vec_addsub(b.op == BinOp::Add, lhs, rhs, pos);
      throw EvalError("shape mismatch: '+'/'-' needs two vectors or scalars" +
                      at(pos));
    }
    if (b.op == BinOp::Mul) {
      if (lhs.v.is_matrix() && rhs.v.is_vector()) return matvec(lhs, rhs, pos);
      if (lhs.v.is_vector() && rs) return vec_scale(lhs, rhs, false, pos);
      if (ls && rhs.v.is_vector()) return vec_scale(rhs, lhs, false, pos);
      if (lhs.v.is_matrix() && rs) return mat_scale(lhs, rhs, pos);
      if (ls && rhs.v.is_matrix()) return mat_scale(rhs, lhs, pos);
      throw EvalError("shape mismatch for '*'" + at(pos));
    }
    if (b.op == BinOp::Div) {
      if (lhs.v.is_vector() && rs) return vec_scale(lhs, rhs, true, pos);
      throw EvalError("shape mismatch for '/'" + at(pos));
    }
    throw EvalError("shape mismatch for '^'" + at(pos));
  }

  TV scalar_binary(BinOp op, const TV& a, const TV& b, SourcePos pos) {
    // int op int stays integral for + - *
    if (a.v.is_int() && b.v.is_int() &&
        (op == BinOp::Add || op == BinOp::Sub || op == BinOp::Mul)) {
      const std::int64_t x = a.v.as_int(), y = b.v.as_int();
      switch (op) {
        case BinOp::Add: return TV{Value(x + y), -1};
        case BinOp::Sub: return TV{Value(x - y), -1};
        default: return TV{Value(x * y), -1};
      }
    }
    const double x = a.v.as_real(), y = b.v.as_real();
    double r;
    switch (op) {
      case BinOp::Add: r = x + y; break;
      case BinOp::Sub: r = x - y; break;
      case BinOp::Mul: r = x * y; break;
      case BinOp::Div: r = x / y; break;
      case BinOp::Pow:
        if (x < 0.0 && std::floor(y) != y)
          throw ModelDomainError("negative base with fractional exponent" +
                                 at(pos));
        r = std::pow(x, y);
        break;
      default:
        throw EvalError("bad scalar op" + at(pos));
    }
    if (!tape_ || (!a.traced() && !b.traced())) return TV{Value(r), -1};

    Op kind;
    double p0 = 0, p1 = 0;
    switch (op) {
      case BinOp::Add: kind = Op::AddSS; p0 = 1; p1 = 1; break;
      case BinOp::Sub: kind = Op::SubSS; p0 = 1; p1 = -1; break;
      case BinOp::Mul: kind = Op::MulSS; p0 = y; p1 = x; break;
      case BinOp::Div: kind = Op::DivSS; p0 = 1 / y; p1 = -x / (y * y); break;
      default:
        kind = Op::PowSS;
        p0 = y * std::pow(x, y - 1.0);
        p1 = x > 0.0 ? r * std::log(x) : 0.0;
        break;
    }
    return scalar_node(kind, constify(a), constify(b), r, p0, p1);
  }

  TV vec_addsub(bool add, const TV& a, const TV& b, SourcePos pos) {
    const std::size_t n = a.v.vec_len();
    if (b.v.vec_len() != n)
      throw EvalError("vector length mismatch" + at(pos));
    std::vector<double> abuf = a.v.to_real_vector();
    std::vector<double> bbuf = b.v.to_real_vector();
    std::vector<double> out(n);
    if (add)
      kernels::ops().add(abuf.data(), bbuf.data(), out.data(), n);
    else
      kernels::ops().sub(abuf.data(), bbuf.data(), out.data(), n);
    if (!tape_ || (!a.traced() && !b.traced()))
      return TV{Value(std::move(out)), -1};
    TapeNode tn;
    tn.kind = add ? Op::AddVV : Op::SubVV;
    tn.a = constify(a);
    tn.b = constify(b);
    tn.vval = std::move(out);
    return vec_node(std::move(tn));
  }

  TV vec_scale(const TV& v, const TV& s, bool divide, SourcePos pos) {
    (void)pos;
    const std::size_t n = v.v.vec_len();
    const double sv = s.v.as_real();
    std::vector<double> buf = v.v.to_real_vector();
    std::vector<double> out(n);
    kernels::ops().scale(buf.data(), divide ? 1.0 / sv : sv, out.data(), n);
    if (!tape_ || (!v.traced() && !s.traced()))
      return TV{Value(std::move(out)), -1};
    TapeNode tn;
    tn.kind = divide ? Op::DivVS : Op::ScaleVS;
    tn.a = constify(v);
    tn.b = constify(s);
    tn.x0 = sv;
    tn.vval = std::move(out);
    return vec_node(std::move(tn));
  }

  TV mat_scale(const TV& m, const TV& s, SourcePos pos) {
    if (m.traced() || s.traced())
      throw EvalError("traced matrix scaling is not supported" + at(pos));
    const Matrix& mat = m.v.as_matrix();
    std::vector<double> out(mat.data->size());
    kernels::ops().scale(mat.raw(), s.v.as_real(), out.data(), out.size());
    Matrix r(mat.prows, mat.pcols, std::move(out));
    r.trans = mat.trans;
    return TV{Value(std::move(r)), -1};
  }

  TV matvec(const TV& m, const TV& v, SourcePos pos) {
    const Matrix& mat = m.v.as_matrix();
    const std::size_t rows = mat.rows(), cols = mat.cols();
    if (v.v.vec_len() != cols)
      throw EvalError("matrix-vector shape mismatch: " + std::to_string(rows) +
                      "x" + std::to_string(cols) + " times vector of length " +
                      std::to_string(v.v.vec_len()) + at(pos));
    std::vector<double> vbuf;
    const double* vdata = v.v.real_data();
    if (!vdata) {
      vbuf = v.v.to_real_vector();
      vdata = vbuf.data();
    }
    std::vector<double> out(rows);
    if (!mat.trans)
      kernels::ops().matvec(mat.raw(), mat.prows, mat.pcols, vdata, out.data());
    else
      kernels::ops().matvec_t(mat.raw(), mat.prows, mat.pcols, vdata,
                              out.data());
    if (!tape_ || !v.traced()) return TV{Value(std::move(out)), -1};
    TapeNode tn;
    tn.kind = mat.trans ? Op::MatVecT : Op::MatVec;
    tn.a = v.node;
    tn.cmat = mat;
    tn.vval = std::move(out);
    return vec_node(std::move(tn));
  }

  TV eval_vector_lit(const VectorLit& v, SourcePos pos) {
    std::vector<TV> elems;
    bool all_int = true, any_traced = false;
    for (const auto& e : v.elems) {
      elems.push_back(eval(*e));
      if (!elems.back().v.is_numeric_scalar())
        throw EvalError("vector literal elements must be scalars" + at(pos));
      all_int &= elems.back().v.is_int();
      any_traced |= elems.back().traced();
    }
    if (all_int && !any_traced) {
      std::vector<std::int64_t> out;
      for (const auto& e : elems) out.push_back(e.v.as_int());
      return TV{Value(std::move(out)), -1};
    }
    std::vector<double> out;
    for (const auto& e : elems) out.push_back(e.v.as_real());
    if (!tape_ || !any_traced) return TV{Value(std::move(out)), -1};
    TapeNode tn;
    tn.kind = Op::Pack;
    for (const auto& e : elems) tn.parents.push_back(constify(e));
    tn.vval = std::move(out);
    return vec_node(std::move(tn));
  }

  // builtins ---------------------------------------------------------

  double scalar_unary_value(const std::string& name, double x, SourcePos pos) {
    if (name == "logistic") return 1.0 / (1.0 + std::exp(-x));
    if (name == "exp") return std::exp(x);
    if (name == "log") {
      if (!(x > 0.0))
        throw ModelDomainError("log of a non-positive value" + at(pos));
      return std::log(x);
    }
    if (name == "sqrt") {
      if (x < 0.0)
        throw ModelDomainError("sqrt of a negative value" + at(pos));
      return std::sqrt(x);
    }
    throw EvalError("'" + name + "' is not a scalar function" + at(pos));
  }

  TV scalar_unary(const std::string& name, const TV& a, SourcePos pos) {
    const double x = a.v.as_real();
    const double r = scalar_unary_value(name, x, pos);
    if (!tape_ || !a.traced()) return TV{Value(r), -1};
    Op kind;
    double p0;
    if (name == "logistic") {
      kind = Op::LogisticS;
      p0 = r * (1.0 - r);
    } else if (name == "exp") {
      kind = Op::ExpS;
      p0 = r;
    } else if (name == "log") {
      kind = Op::LogS;
      p0 = 1.0 / x;
    } else {
      kind = Op::SqrtS;
      p0 = 0.5 / r;
    }
    return scalar_node(kind, a.node, -1, r, p0, 0.0);
  }

  TV eval_call(const CallExpr& c, SourcePos pos) {
    if (is_distribution_name(c.name))
      throw EvalError("distribution call outside a tilde statement" + at(pos));
    if (c.name == "size") {
      TV x = eval(*c.args[0]);
      TV k = eval(*c.args[1]);
      const std::int64_t dim = k.v.as_int();
      if (x.v.is_matrix()) {
        if (dim == 1) return TV{Value(static_cast<std::int64_t>(x.v.as_matrix().rows())), -1};
        if (dim == 2) return TV{Value(static_cast<std::int64_t>(x.v.as_matrix().cols())), -1};
        throw EvalError("size dimension must be 1 or 2" + at(pos));
      }
      if (x.v.is_vector()) {
        if (dim == 1) return TV{Value(static_cast<std::int64_t>(x.v.vec_len())), -1};
        if (dim == 2) return TV{Value(std::int64_t{1}), -1};
        throw EvalError("size dimension must be 1 or 2" + at(pos));
      }
      throw EvalError("size needs a vector or matrix" + at(pos));
    }
    if (c.name == "zeros" || c.name == "ones") {
      TV n = eval(*c.args[0]);
      const std::int64_t len = n.v.as_int();
      if (len < 0) throw EvalError("negative length" + at(pos));
      return TV{Value(std::vector<double>(static_cast<std::size_t>(len),
                                          c.name == "ones" ? 1.0 : 0.0)),
                -1};
    }
    if (c.name == "sum") {
      TV x = eval(*c.args[0]);
      if (!x.v.is_vector()) {
        if (x.v.is_numeric_scalar()) return x;
        throw EvalError("sum needs a vector" + at(pos));
      }
      std::vector<double> buf;
      const double* data = x.v.real_data();
      if (!data) {
        buf = x.v.to_real_vector();
        data = buf.data();
      }
      const double r = kernels::ops().sum(data, x.v.vec_len());
      if (!tape_ || !x.traced()) return TV{Value(r), -1};
      TapeNode tn;
      tn.kind = Op::SumV;
      tn.a = x.node;
      tn.sval = r;
      return TV{Value(r), tape_->push(std::move(tn))};
    }
    // scalar unary builtins
    TV a = eval(*c.args[0]);
    if (!a.v.is_numeric_scalar())
      throw EvalError("'" + c.name + "' expects a scalar; use '" + c.name +
                      ".(...)' for element-wise application" + at(pos));
    return scalar_unary(c.name, a, pos);
  }

  TV eval_broadcast(const BroadcastCallExpr& c, SourcePos pos) {
    if (is_distribution_name(c.name))
      throw EvalError("broadcast distribution call outside a tilde statement" +
                      at(pos));
    if (c.name == "size" || c.name == "zeros" || c.name == "ones" ||
        c.name == "sum")
      throw EvalError("'" + c.name + "' cannot be broadcast" + at(pos));

    TV a = eval(*c.args[0]);
    if (a.v.is_numeric_scalar()) return scalar_unary(c.name, a, pos);
    if (!a.v.is_vector())
      throw EvalError("broadcast argument must be a scalar or vector" +
                      at(pos));

    const std::size_t n = a.v.vec_len();
    std::vector<double> buf;
    const double* data = a.v.real_data();
    if (!data) {
      buf = a.v.to_real_vector();
      data = buf.data();
    }
    // domain checks mirror the scalar builtins
    if (c.name == "log") {
      for (std::size_t i = 0; i < n; ++i)
        if (!(data[i] > 0.0))
          throw ModelDomainError("log of a non-positive value" + at(pos));
    } else if (c.name == "sqrt") {
      for (std::size_t i = 0; i < n; ++i)
        if (data[i] < 0.0)
          throw ModelDomainError("sqrt of a negative value" + at(pos));
    }
    std::vector<double> out(n);
    const auto& k = kernels::ops();
    Op kind;
    if (c.name == "logistic") {
      k.vlogistic(data, out.data(), n);
      kind = Op::LogisticV;
    } else if (c.name == "exp") {
      k.vexp(data, out.data(), n);
      kind = Op::ExpV;
    } else if (c.name == "log") {
      k.vlog(data, out.data(), n);
      kind = Op::LogV;
    } else if (c.name == "sqrt") {
      k.vsqrt(data, out.data(), n);
      kind = Op::SqrtV;
    } else {
      throw EvalError("'" + c.name + "' cannot be broadcast" + at(pos));
    }
    if (!tape_ || !a.traced()) return TV{Value(std::move(out)), -1};
    TapeNode tn;
    tn.kind = kind;
    tn.a = a.node;
    tn.vval = std::move(out);
    return vec_node(std::move(tn));
  }

  // ----------------------------------------------------------- members

  const Model& m_;
  TraceT& t_;
  Context ctx_;
  Rng& rng_;
  Tape* tape_;
  EvalOptions opts_;
  std::unordered_map<std::string, TV> locals_;
  std::unordered_map<std::string, TV> arg_cache_;
  FlatLayout layout_;
  int acc_node_ = -1;
  bool halted_ = false;
};

}  // namespace

double evaluate(const Model& m, UntypedTrace& t, const Context& ctx, Rng& rng,
                const EvalOptions& opts) {
  Evaluator<UntypedTrace> ev(m, t, ctx, rng, nullptr, opts);
  return ev.run();
}

double evaluate(const Model& m, TypedTrace& t, const Context& ctx, Rng& rng,
                const EvalOptions& opts) {
  Evaluator<TypedTrace> ev(m, t, ctx, rng, nullptr, opts);
  return ev.run();
}

TracedLogp evaluate_traced(const Model& m, TypedTrace& t, const Context& ctx,
                           Tape& tape, const EvalOptions& opts) {
  Rng dummy(0);  // tape evaluation never samples
  Evaluator<TypedTrace> ev(m, t, ctx, dummy, &tape, opts);
  TracedLogp out;
  out.logp = ev.run();
  out.node = ev.logp_node();
  return out;
}

}  // namespace ppl
