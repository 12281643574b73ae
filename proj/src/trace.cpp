#include "ppl/trace.hpp"

#include <algorithm>
#include <cstring>

namespace ppl {

namespace {

ElemType elem_type_of(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::Real:
    case Value::Kind::RealVec:
    case Value::Kind::Span:
      return ElemType::Real;
    case Value::Kind::Int:
    case Value::Kind::IntVec:
      return ElemType::Int;
    default:
      throw EvalError("cannot store a " + v.kind_name() + " in a trace");
  }
}

bool value_is_scalar(const Value& v) { return v.is_numeric_scalar(); }

std::size_t value_len(const Value& v) {
  return value_is_scalar(v) ? 1 : v.vec_len();
}

bool same_family(const Distribution& a, const Distribution& b) {
  return a.kind() == b.kind() && a.dim() == b.dim();
}

}  // namespace

// ------------------------------------------------------------- untyped

bool UntypedTrace::lookup(const VarName& vn, Slot& out) const {
  auto it = index_.find(varname_to_string(vn));
  if (it == index_.end()) return false;
  out.a = static_cast<std::uint32_t>(it->second);
  out.b = 0;
  return true;
}

Slot UntypedTrace::insert(const VarName& vn, Distribution dist,
                          const Value& v) {
  Entry e{vn,
          varname_to_string(vn),
          std::move(dist),
          false,
          static_cast<int>(entries_.size()),
          storage_.size(),
          value_len(v),
          value_is_scalar(v),
          elem_type_of(v)};
  if (index_.count(e.key) != 0)
    throw StateError("duplicate trace entry " + e.key);

  if (e.scalar) {
    Box b{e.et, {}};
    if (e.et == ElemType::Real)
      b.d = v.as_real();
    else
      b.i = v.as_int();
    storage_.push_back(b);
  } else if (e.et == ElemType::Real) {
    for (std::size_t i = 0; i < e.len; ++i) {
      Box b{ElemType::Real, {}};
      b.d = v.vec_at(i);
      storage_.push_back(b);
    }
  } else {
    const auto& iv = v.int_vec();
    for (std::size_t i = 0; i < e.len; ++i) {
      Box b{ElemType::Int, {}};
      b.i = iv[i];
      storage_.push_back(b);
    }
  }

  index_.emplace(e.key, entries_.size());
  entries_.push_back(std::move(e));
  Slot s;
  s.a = static_cast<std::uint32_t>(entries_.size() - 1);
  return s;
}

Value UntypedTrace::read(Slot s) const {
  const Entry& e = entries_[s.a];
  const Box* boxes = storage_.data() + e.offset;
  if (e.scalar) {
    const Box& b = boxes[0];
    return b.tag == ElemType::Real ? Value(b.d) : Value(b.i);
  }
  // materialize box by box; the tag check per element is the cost of
  // heterogeneous storage
  if (e.et == ElemType::Real) {
    std::vector<double> out(e.len);
    for (std::size_t i = 0; i < e.len; ++i)
      out[i] = boxes[i].tag == ElemType::Real
                   ? boxes[i].d
                   : static_cast<double>(boxes[i].i);
    return Value(std::move(out));
  }
  std::vector<std::int64_t> out(e.len);
  for (std::size_t i = 0; i < e.len; ++i)
    out[i] = boxes[i].tag == ElemType::Int
                 ? boxes[i].i
                 : static_cast<std::int64_t>(boxes[i].d);
  return Value(std::move(out));
}

void UntypedTrace::write(Slot s, const Value& v) {
  Entry& e = entries_[s.a];
  if (value_len(v) != e.len || value_is_scalar(v) != e.scalar)
    throw EvalError("shape mismatch writing " + e.key);
  Box* boxes = storage_.data() + e.offset;
  if (e.scalar) {
    if (e.et == ElemType::Real)
      boxes[0].d = v.as_real();
    else
      boxes[0].i = v.as_int();
    return;
  }
  if (e.et == ElemType::Real) {
    for (std::size_t i = 0; i < e.len; ++i) boxes[i].d = v.vec_at(i);
  } else {
    const auto& iv = v.int_vec();
    for (std::size_t i = 0; i < e.len; ++i) boxes[i].i = iv[i];
  }
}

void UntypedTrace::set_dist(Slot s, const Distribution& d) {
  if (!same_family(entries_[s.a].dist, d)) entries_[s.a].dist = d;
}

Value UntypedTrace::get_value(const VarName& vn) const {
  Slot s;
  if (!lookup(vn, s))
    throw NotFoundError("no trace entry " + varname_to_string(vn));
  return read(s);
}

void UntypedTrace::set_value(const VarName& vn, const Value& v) {
  Slot s;
  if (!lookup(vn, s))
    throw NotFoundError("no trace entry " + varname_to_string(vn));
  write(s, v);
}

// --------------------------------------------------------------- typed

TypedTrace TypedTrace::specialize(const UntypedTrace& t) {
  TypedTrace out;
  for (const auto& e : t.entries()) {
    Group& g = out.group_for_insert(e.name.symbol, e.et);
    if (g.et != e.et) throw SpecializationError(e.name.symbol);
    const auto* boxes = t.storage().data() + e.offset;
    std::size_t offset;
    if (e.et == ElemType::Real) {
      offset = g.rbuf.size();
      for (std::size_t i = 0; i < e.len; ++i)
        g.rbuf.push_back(boxes[i].tag == ElemType::Real
                             ? boxes[i].d
                             : static_cast<double>(boxes[i].i));
    } else {
      offset = g.ibuf.size();
      for (std::size_t i = 0; i < e.len; ++i)
        g.ibuf.push_back(boxes[i].tag == ElemType::Int
                             ? boxes[i].i
                             : static_cast<std::int64_t>(boxes[i].d));
    }
    g.index.emplace(e.key, g.names.size());
    g.names.push_back(e.name);
    g.keys.push_back(e.key);
    g.dists.push_back(e.dist);
    g.ranges.emplace_back(offset, e.len);
    g.linked.push_back(e.linked ? 1 : 0);
    g.scalar.push_back(e.scalar ? 1 : 0);
    g.order.push_back(e.order);
    out.next_order_ = std::max(out.next_order_, e.order + 1);
  }
  out.logp_.reset();
  out.logp_.add(t.logp());
  return out;
}

TypedTrace::Group& TypedTrace::group_for_insert(const std::string& symbol,
                                                ElemType et) {
  auto it = group_idx_.find(symbol);
  if (it != group_idx_.end()) return groups_[it->second];
  group_idx_.emplace(symbol, groups_.size());
  Group g;
  g.symbol = symbol;
  g.et = et;
  groups_.push_back(std::move(g));
  return groups_.back();
}

bool TypedTrace::lookup(const VarName& vn, Slot& out) const {
  auto git = group_idx_.find(vn.symbol);
  if (git == group_idx_.end()) return false;
  const Group& g = groups_[git->second];
  auto it = g.index.find(varname_to_string(vn));
  if (it == g.index.end()) return false;
  out.a = static_cast<std::uint32_t>(git->second);
  out.b = static_cast<std::uint32_t>(it->second);
  return true;
}

Slot TypedTrace::insert(const VarName& vn, Distribution dist, const Value& v) {
  auto git = group_idx_.find(vn.symbol);
  if (git == group_idx_.end())
    throw StateError("new symbol '" + vn.symbol +
                     "' in a typed trace; re-specialize from an untyped run");
  Group& g = groups_[git->second];
  const ElemType et = elem_type_of(v);
  if (g.et != et) throw SpecializationError(vn.symbol);

  const std::size_t len = value_len(v);
  std::size_t offset;
  if (et == ElemType::Real) {
    // keep old storage alive until the next begin_evaluation: spans
    // handed out earlier in this evaluation may still be read
    if (g.rbuf.capacity() < g.rbuf.size() + len) {
      std::vector<double> bigger;
      bigger.reserve(std::max(g.rbuf.size() + len, g.rbuf.size() * 2 + 8));
      bigger.assign(g.rbuf.begin(), g.rbuf.end());
      graveyard_.push_back(std::move(g.rbuf));
      g.rbuf = std::move(bigger);
    }
    offset = g.rbuf.size();
    if (value_is_scalar(v)) {
      g.rbuf.push_back(v.as_real());
    } else {
      for (std::size_t i = 0; i < len; ++i) g.rbuf.push_back(v.vec_at(i));
    }
  } else {
    offset = g.ibuf.size();
    if (value_is_scalar(v)) {
      g.ibuf.push_back(v.as_int());
    } else {
      const auto& iv = v.int_vec();
      g.ibuf.insert(g.ibuf.end(), iv.begin(), iv.end());
    }
  }

  std::string key = varname_to_string(vn);
  g.index.emplace(key, g.names.size());
  g.names.push_back(vn);
  g.keys.push_back(std::move(key));
  g.dists.push_back(std::move(dist));
  g.ranges.emplace_back(offset, len);
  g.linked.push_back(0);
  g.scalar.push_back(value_is_scalar(v) ? 1 : 0);
  g.order.push_back(next_order_++);

  Slot s;
  s.a = static_cast<std::uint32_t>(git->second);
  s.b = static_cast<std::uint32_t>(g.names.size() - 1);
  return s;
}

Value TypedTrace::read(Slot s) const {
  const Group& g = groups_[s.a];
  const auto [offset, len] = g.ranges[s.b];
  if (g.et == ElemType::Real) {
    if (g.scalar[s.b]) return Value(g.rbuf[offset]);
    return Value(RealSpan{g.rbuf.data() + offset, len});
  }
  if (g.scalar[s.b]) return Value(g.ibuf[offset]);
  return Value(std::vector<std::int64_t>(g.ibuf.begin() + offset,
                                         g.ibuf.begin() + offset + len));
}

void TypedTrace::write(Slot s, const Value& v) {
  Group& g = groups_[s.a];
  const auto [offset, len] = g.ranges[s.b];
  if (value_len(v) != len || value_is_scalar(v) != static_cast<bool>(g.scalar[s.b]))
    throw EvalError("shape mismatch writing " + g.keys[s.b]);
  if (g.et == ElemType::Real) {
    if (g.scalar[s.b]) {
      g.rbuf[offset] = v.as_real();
    } else if (const double* p = v.real_data()) {
      std::memcpy(g.rbuf.data() + offset, p, len * sizeof(double));
    } else {
      for (std::size_t i = 0; i < len; ++i) g.rbuf[offset + i] = v.vec_at(i);
    }
  } else {
    if (g.scalar[s.b]) {
      g.ibuf[offset] = v.as_int();
    } else {
      const auto& iv = v.int_vec();
      std::copy(iv.begin(), iv.end(), g.ibuf.begin() + offset);
    }
  }
}

void TypedTrace::set_dist(Slot s, const Distribution& d) {
  Group& g = groups_[s.a];
  if (!same_family(g.dists[s.b], d)) g.dists[s.b] = d;
}

Value TypedTrace::get_value(const VarName& vn) const {
  Slot s;
  if (!lookup(vn, s))
    throw NotFoundError("no trace entry " + varname_to_string(vn));
  return read(s);
}

void TypedTrace::set_value(const VarName& vn, const Value& v) {
  Slot s;
  if (!lookup(vn, s))
    throw NotFoundError("no trace entry " + varname_to_string(vn));
  write(s, v);
}

void TypedTrace::convert(const std::vector<std::string>& symbols,
                         bool to_linked) {
  std::vector<std::size_t> targets;
  if (symbols.empty()) {
    for (std::size_t i = 0; i < groups_.size(); ++i)
      if (groups_[i].et == ElemType::Real) targets.push_back(i);
  } else {
    for (const auto& sym : symbols) {
      auto it = group_idx_.find(sym);
      if (it == group_idx_.end())
        throw NotFoundError("no symbol '" + sym + "' in trace");
      targets.push_back(it->second);
    }
  }

  for (std::size_t gi : targets) {
    Group& g = groups_[gi];
    if (g.et != ElemType::Real)
      throw NotDifferentiableError("symbol '" + g.symbol +
                                   "' holds discrete values");
    std::vector<double> nbuf;
    nbuf.reserve(g.rbuf.size());
    std::vector<std::pair<std::size_t, std::size_t>> nranges(g.ranges.size());
    for (std::size_t i = 0; i < g.names.size(); ++i) {
      if (static_cast<bool>(g.linked[i]) == to_linked)
        throw StateError(std::string(to_linked ? "link" : "invlink") +
                         ": entry " + g.keys[i] + " already in that state");
      const Bijector b = bijector_of(g.dists[i]);
      const auto [offset, len] = g.ranges[i];
      std::vector<double> img;
      if (to_linked) {
        img = bijector_apply(b, g.rbuf.data() + offset, len).y;
      } else {
        img = bijector_inverse(b, g.rbuf.data() + offset, len);
      }
      nranges[i] = {nbuf.size(), img.size()};
      nbuf.insert(nbuf.end(), img.begin(), img.end());
      g.linked[i] = to_linked ? 1 : 0;
    }
    graveyard_.push_back(std::move(g.rbuf));
    g.rbuf = std::move(nbuf);
    g.ranges = std::move(nranges);
  }
}

void TypedTrace::link(const std::vector<std::string>& symbols) {
  convert(symbols, true);
}

void TypedTrace::invlink(const std::vector<std::string>& symbols) {
  convert(symbols, false);
}

namespace {

struct FlatRef {
  int order;
  std::size_t group, idx;
};

}  // namespace

std::size_t TypedTrace::flat_size() const {
  std::size_t n = 0;
  for (const auto& g : groups_)
    if (g.et == ElemType::Real) n += g.rbuf.size();
  return n;
}

std::vector<double> TypedTrace::flatten() const {
  std::vector<FlatRef> refs;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    if (g.et != ElemType::Real) continue;
    for (std::size_t i = 0; i < g.names.size(); ++i)
      refs.push_back({g.order[i], gi, i});
  }
  std::sort(refs.begin(), refs.end(),
            [](const FlatRef& a, const FlatRef& b) { return a.order < b.order; });
  std::vector<double> out;
  out.reserve(flat_size());
  for (const auto& r : refs) {
    const Group& g = groups_[r.group];
    const auto [offset, len] = g.ranges[r.idx];
    out.insert(out.end(), g.rbuf.begin() + offset, g.rbuf.begin() + offset + len);
  }
  return out;
}

void TypedTrace::unflatten(const double* theta, std::size_t n) {
  if (n != flat_size())
    throw EvalError("unflatten: expected " + std::to_string(flat_size()) +
                    " values, got " + std::to_string(n));
  std::vector<FlatRef> refs;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    if (g.et != ElemType::Real) continue;
    for (std::size_t i = 0; i < g.names.size(); ++i)
      refs.push_back({g.order[i], gi, i});
  }
  std::sort(refs.begin(), refs.end(),
            [](const FlatRef& a, const FlatRef& b) { return a.order < b.order; });
  std::size_t pos = 0;
  for (const auto& r : refs) {
    Group& g = groups_[r.group];
    const auto [offset, len] = g.ranges[r.idx];
    std::copy(theta + pos, theta + pos + len, g.rbuf.begin() + offset);
    pos += len;
  }
}

std::size_t TypedTrace::int_size() const {
  std::size_t n = 0;
  for (const auto& g : groups_)
    if (g.et == ElemType::Int) n += g.ibuf.size();
  return n;
}

std::vector<std::int64_t> TypedTrace::int_values() const {
  std::vector<FlatRef> refs;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    if (g.et != ElemType::Int) continue;
    for (std::size_t i = 0; i < g.names.size(); ++i)
      refs.push_back({g.order[i], gi, i});
  }
  std::sort(refs.begin(), refs.end(),
            [](const FlatRef& a, const FlatRef& b) { return a.order < b.order; });
  std::vector<std::int64_t> out;
  for (const auto& r : refs) {
    const Group& g = groups_[r.group];
    const auto [offset, len] = g.ranges[r.idx];
    out.insert(out.end(), g.ibuf.begin() + offset, g.ibuf.begin() + offset + len);
  }
  return out;
}

void TypedTrace::set_int_values(const std::vector<std::int64_t>& v) {
  if (v.size() != int_size())
    throw EvalError("set_int_values: length mismatch");
  std::vector<FlatRef> refs;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    if (g.et != ElemType::Int) continue;
    for (std::size_t i = 0; i < g.names.size(); ++i)
      refs.push_back({g.order[i], gi, i});
  }
  std::sort(refs.begin(), refs.end(),
            [](const FlatRef& a, const FlatRef& b) { return a.order < b.order; });
  std::size_t pos = 0;
  for (const auto& r : refs) {
    Group& g = groups_[r.group];
    const auto [offset, len] = g.ranges[r.idx];
    std::copy(v.begin() + pos, v.begin() + pos + len, g.ibuf.begin() + offset);
    pos += len;
  }
}

std::size_t TypedTrace::size() const {
  std::size_t n = 0;
  for (const auto& g : groups_) n += g.names.size();
  return n;
}

std::vector<std::string> TypedTrace::constrained_names() const {
  std::vector<FlatRef> refs;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    for (std::size_t i = 0; i < g.names.size(); ++i)
      refs.push_back({g.order[i], gi, i});
  }
  std::sort(refs.begin(), refs.end(),
            [](const FlatRef& a, const FlatRef& b) { return a.order < b.order; });
  std::vector<std::string> out;
  for (const auto& r : refs) {
    const Group& g = groups_[r.group];
    if (g.scalar[r.idx]) {
      out.push_back(g.keys[r.idx]);
      continue;
    }
    const std::size_t ulen = g.dists[r.idx].dim();
    for (std::size_t k = 1; k <= ulen; ++k) {
      VarName v = g.names[r.idx];
      v.path.push_back({IndexAtom{static_cast<std::int64_t>(k)}});
      out.push_back(varname_to_string(v));
    }
  }
  return out;
}

void TypedTrace::constrained_row(std::vector<double>& out) const {
  std::vector<FlatRef> refs;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const Group& g = groups_[gi];
    for (std::size_t i = 0; i < g.names.size(); ++i)
      refs.push_back({g.order[i], gi, i});
  }
  std::sort(refs.begin(), refs.end(),
            [](const FlatRef& a, const FlatRef& b) { return a.order < b.order; });
  out.clear();
  for (const auto& r : refs) {
    const Group& g = groups_[r.group];
    const auto [offset, len] = g.ranges[r.idx];
    if (g.et == ElemType::Int) {
      for (std::size_t k = 0; k < len; ++k)
        out.push_back(static_cast<double>(g.ibuf[offset + k]));
      continue;
    }
    if (g.linked[r.idx]) {
      const Bijector b = bijector_of(g.dists[r.idx]);
      auto x = bijector_inverse(b, g.rbuf.data() + offset, len);
      out.insert(out.end(), x.begin(), x.end());
    } else {
      out.insert(out.end(), g.rbuf.begin() + offset,
                 g.rbuf.begin() + offset + len);
    }
  }
}

}  // namespace ppl
