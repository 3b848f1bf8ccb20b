#pragma once

#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kfiltr/invariants.hpp"
#include "kfiltr/oracle.hpp"

namespace kfiltr {

using Json = nlohmann::ordered_json;

struct Task {
  std::string command;
  std::map<std::string, std::string> args;

  std::optional<std::string> arg(const std::string& key) const {
    auto it = args.find(key);
    if (it == args.end()) return std::nullopt;
    return it->second;
  }
  int int_arg(const std::string& key, int fallback) const {
    auto v = arg(key);
    if (!v) return fallback;
    try {
      return std::stoi(*v);
    } catch (const std::exception&) {
      throw Error(Errc::ValidationError,
                  "task argument '" + key + "' is not an integer: " + *v);
    }
  }
};

inline const std::set<std::string>& known_commands() {
  static const std::set<std::string> cmds = {
      "hilbert", "invariants", "df",     "df-rel",   "futaki",
      "chow",    "chow-rel",   "approx", "blowup",   "nu",
      "chow-inf", "cm-diff",   "check"};
  return cmds;
}

struct ProblemFile {
  std::shared_ptr<const LatticePolytope> polytope;
  std::vector<std::string> filtration_order;
  std::map<std::string, Filtration> filtrations;
  std::vector<OneParamSubgroup> torus_generators;
  std::vector<Task> tasks;
  Json canonical;  // normalized document, used for serialization

  const Filtration& filtration(const std::string& name) const {
    auto it = filtrations.find(name);
    if (it == filtrations.end())
      throw Error(Errc::ValidationError,
                  "unknown filtration '" + name + "'");
    return it->second;
  }

  TorusBasis torus_basis() const {
    return TorusBasis(polytope, torus_generators);
  }
};

namespace io_detail {

inline std::pair<int, int> line_column(const std::string& text,
                                       std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline void reject_unknown_keys(const Json& obj, const std::string& where,
                                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw Error(Errc::ValidationError,
                  where + ": unknown key \"" + key + "\"");
}

inline Int json_int(const Json& v, const std::string& where) {
  if (!v.is_number_integer())
    throw Error(Errc::ValidationError, where + ": expected an integer");
  return Int(v.get<long long>());
}

inline IVec json_ivec(const Json& v, int dim, const std::string& where) {
  if (!v.is_array() || static_cast<int>(v.size()) != dim)
    throw Error(Errc::ValidationError,
                where + ": expected an integer array of length " +
                    std::to_string(dim));
  IVec out;
  for (const Json& x : v) out.push_back(json_int(x, where));
  return out;
}

inline Rat json_rational(const Json& v, const std::string& where) {
  if (v.is_number_integer()) return Rat(Int(v.get<long long>()));
  if (v.is_string()) {
    auto q = try_parse_rational(v.get<std::string>());
    if (q) return *q;
  }
  throw Error(Errc::ValidationError,
              where + ": expected a rational encoded as \"p/q\"");
}

inline AffineForm json_form(const Json& v, int dim, const std::string& where) {
  if (!v.is_object())
    throw Error(Errc::ValidationError, where + ": expected {\"u\", \"c\"}");
  reject_unknown_keys(v, where, {"u", "c"});
  if (!v.contains("u") || !v.contains("c"))
    throw Error(Errc::ValidationError, where + ": needs both u and c");
  return AffineForm{json_ivec(v.at("u"), dim, where + ".u"),
                    json_int(v.at("c"), where + ".c")};
}

struct FiltrationResolver {
  const Json& defs;
  std::shared_ptr<const LatticePolytope> polytope;
  std::map<std::string, Filtration> done;
  std::set<std::string> in_progress;

  Filtration resolve(const std::string& name) {
    auto hit = done.find(name);
    if (hit != done.end()) return hit->second;
    if (!defs.contains(name))
      throw Error(Errc::ValidationError,
                  "filtration \"" + name + "\" is not defined");
    if (!in_progress.insert(name).second)
      throw Error(Errc::ValidationError,
                  "filtration \"" + name + "\" depends on itself");
    Filtration f = build(name, defs.at(name));
    in_progress.erase(name);
    done.emplace(name, f);
    return f;
  }

  Filtration build(const std::string& name, const Json& def) {
    const std::string where = "filtrations." + name;
    if (!def.is_object())
      throw Error(Errc::ValidationError, where + ": expected an object");
    if (!def.contains("type"))
      throw Error(Errc::ValidationError, where + ": missing \"type\"");
    const std::string type = def.at("type").get<std::string>();
    const int n = polytope->dim();
    if (type == "min_affine") {
      reject_unknown_keys(def, where, {"type", "forms"});
      if (!def.contains("forms") || !def.at("forms").is_array() ||
          def.at("forms").empty())
        throw Error(Errc::ValidationError,
                    where + ": min_affine needs a nonempty forms array");
      std::vector<AffineForm> forms;
      for (const Json& fj : def.at("forms"))
        forms.push_back(json_form(fj, n, where + ".forms[]"));
      return Filtration::min_affine(polytope, std::move(forms));
    }
    if (type == "shifted") {
      reject_unknown_keys(def, where, {"type", "base", "s"});
      if (!def.contains("base") || !def.contains("s"))
        throw Error(Errc::ValidationError,
                    where + ": shifted needs base and s");
      return shift(resolve(def.at("base").get<std::string>()),
                   json_rational(def.at("s"), where + ".s"));
    }
    if (type == "twist") {
      reject_unknown_keys(def, where, {"type", "base", "u", "c"});
      if (!def.contains("base") || !def.contains("u") || !def.contains("c"))
        throw Error(Errc::ValidationError,
                    where + ": twist needs base, u and c");
      return twist(resolve(def.at("base").get<std::string>()),
                   OneParamSubgroup{
                       AffineForm{json_ivec(def.at("u"), n, where + ".u"),
                                  json_int(def.at("c"), where + ".c")}});
    }
    if (type == "generated") {
      reject_unknown_keys(def, where, {"type", "base", "r", "table"});
      if (!def.contains("r"))
        throw Error(Errc::ValidationError, where + ": generated needs r");
      const int r = static_cast<int>(json_int(def.at("r"), where + ".r"));
      if (def.contains("base") == def.contains("table"))
        throw Error(Errc::ValidationError,
                    where + ": generated needs exactly one of base, table");
      if (def.contains("base"))
        return approximate(resolve(def.at("base").get<std::string>()), r);
      std::map<IVec, Int> table;
      for (const Json& e : def.at("table")) {
        if (!e.is_object())
          throw Error(Errc::ValidationError,
                      where + ".table[]: expected {point, value}");
        reject_unknown_keys(e, where + ".table[]", {"point", "value"});
        const IVec p = json_ivec(e.at("point"), n, where + ".table[].point");
        if (!table.emplace(p, json_int(e.at("value"), where + ".table[].value"))
                 .second)
          throw Error(Errc::ValidationError,
                      where + ".table[]: duplicate point");
      }
      return Filtration::generated(*polytope, r, std::move(table));
    }
    if (type == "blowup") {
      reject_unknown_keys(def, where, {"type", "base", "m", "vertex"});
      if (!def.contains("base") || !def.contains("m"))
        throw Error(Errc::ValidationError,
                    where + ": blowup needs base and m");
      const int m = static_cast<int>(json_int(def.at("m"), where + ".m"));
      const std::size_t vertex =
          def.contains("vertex")
              ? static_cast<std::size_t>(
                    json_int(def.at("vertex"), where + ".vertex"))
              : 0;
      const Filtration base = resolve(def.at("base").get<std::string>());
      return blowup_filtration(base, blowup_body(polytope, vertex, m));
    }
    throw Error(Errc::ValidationError,
                where + ": unknown filtration type \"" + type + "\"");
  }
};

inline Json canonical_form_json(const AffineForm& f) {
  Json j;
  Json u = Json::array();
  for (const Int& x : f.u) u.push_back(static_cast<long long>(x));
  j["u"] = std::move(u);
  j["c"] = static_cast<long long>(f.c);
  return j;
}

inline Json canonical_def(const Json& def) {
  // Rebuilds a filtration definition with a fixed key order so that
  // serialization is stable independent of the author's key order.
  Json out;
  out["type"] = def.at("type");
  for (const char* key : {"forms", "base", "s", "u", "c", "r", "table", "m",
                          "vertex"})
    if (def.contains(key)) out[key] = def.at(key);
  return out;
}

}  // namespace io_detail

/// Parses and validates a problem file. Unknown keys, rational vertices,
/// duplicate names and dangling references are rejected; parse errors carry
/// line/column positions.
inline ProblemFile parse_problem_text(const std::string& text) {
  namespace iod = io_detail;
  Json doc;
  {
    std::vector<std::set<std::string>> key_stack;
    Json::parser_callback_t cb = [&key_stack](int, Json::parse_event_t event,
                                              Json& parsed) {
      if (event == Json::parse_event_t::object_start) {
        key_stack.emplace_back();
      } else if (event == Json::parse_event_t::key) {
        if (!key_stack.back().insert(parsed.get<std::string>()).second)
          throw Error(Errc::ValidationError,
                      "duplicate key \"" + parsed.get<std::string>() + "\"");
      } else if (event == Json::parse_event_t::object_end) {
        key_stack.pop_back();
      }
      return true;
    };
    try {
      doc = Json::parse(text, cb);
    } catch (const Json::parse_error& e) {
      const auto [line, col] = iod::line_column(text, e.byte);
      throw Error(Errc::ParseError, "line " + std::to_string(line) +
                                        ", column " + std::to_string(col) +
                                        ": " + e.what());
    }
  }
  if (!doc.is_object())
    throw Error(Errc::ValidationError, "problem file must be a JSON object");
  iod::reject_unknown_keys(doc, "problem",
                           {"polytope", "filtrations", "torus", "tasks"});
  if (!doc.contains("polytope"))
    throw Error(Errc::ValidationError, "problem file needs a polytope");
  const Json& pj = doc.at("polytope");
  if (!pj.is_object())
    throw Error(Errc::ValidationError, "polytope must be an object");
  iod::reject_unknown_keys(pj, "polytope", {"dim", "vertices"});
  if (!pj.contains("dim") || !pj.contains("vertices"))
    throw Error(Errc::ValidationError, "polytope needs dim and vertices");
  const int dim = static_cast<int>(iod::json_int(pj.at("dim"), "polytope.dim"));
  if (!pj.at("vertices").is_array())
    throw Error(Errc::ValidationError, "polytope.vertices must be an array");
  std::vector<IVec> verts;
  for (const Json& vj : pj.at("vertices")) {
    if (vj.is_array())
      for (const Json& x : vj)
        if (x.is_number_float())
          throw Error(Errc::ValidationError,
                      "polytope.vertices: non-integral vertex coordinate");
    verts.push_back(iod::json_ivec(vj, dim, "polytope.vertices[]"));
  }

  ProblemFile pf;
  pf.polytope = std::make_shared<LatticePolytope>(dim, std::move(verts));

  if (doc.contains("torus")) {
    if (!doc.at("torus").is_array())
      throw Error(Errc::ValidationError, "torus must be an array");
    for (const Json& gj : doc.at("torus"))
      pf.torus_generators.push_back(
          OneParamSubgroup{iod::json_form(gj, dim, "torus[]")});
    pf.torus_basis();  // validates independence and rank
  }

  if (doc.contains("filtrations")) {
    const Json& fj = doc.at("filtrations");
    if (!fj.is_object())
      throw Error(Errc::ValidationError, "filtrations must be an object");
    iod::FiltrationResolver resolver{fj, pf.polytope, {}, {}};
    for (const auto& [name, def] : fj.items()) {
      pf.filtration_order.push_back(name);
      pf.filtrations.emplace(name, resolver.resolve(name));
    }
  }

  if (doc.contains("tasks")) {
    if (!doc.at("tasks").is_array())
      throw Error(Errc::ValidationError, "tasks must be an array");
    for (const Json& tj : doc.at("tasks")) {
      if (!tj.is_object())
        throw Error(Errc::ValidationError, "tasks[]: expected an object");
      iod::reject_unknown_keys(
          tj, "tasks[]",
          {"command", "filtration", "against", "k", "r", "m", "p", "vertex"});
      if (!tj.contains("command"))
        throw Error(Errc::ValidationError, "tasks[]: missing command");
      Task t;
      t.command = tj.at("command").get<std::string>();
      if (!known_commands().count(t.command))
        throw Error(Errc::ValidationError,
                    "tasks[]: unknown command \"" + t.command + "\"");
      for (const auto& [key, value] : tj.items()) {
        if (key == "command") continue;
        t.args[key] = value.is_string()
                          ? value.get<std::string>()
                          : std::to_string(value.get<long long>());
      }
      for (const char* ref : {"filtration", "against"})
        if (t.args.count(ref) && !pf.filtrations.count(t.args.at(ref)))
          throw Error(Errc::ValidationError,
                      "tasks[]: unknown filtration \"" + t.args.at(ref) +
                          "\"");
      pf.tasks.push_back(std::move(t));
    }
  }

  // Canonical document for stable serialization.
  Json canon;
  {
    Json cp;
    cp["dim"] = dim;
    Json cv = Json::array();
    for (const IVec& v : pf.polytope->vertices()) {
      Json row = Json::array();
      for (const Int& x : v) row.push_back(static_cast<long long>(x));
      cv.push_back(std::move(row));
    }
    cp["vertices"] = std::move(cv);
    canon["polytope"] = std::move(cp);
    if (doc.contains("filtrations")) {
      Json cf;
      for (const std::string& name : pf.filtration_order)
        cf[name] = iod::canonical_def(doc.at("filtrations").at(name));
      canon["filtrations"] = std::move(cf);
    }
    if (doc.contains("torus")) {
      Json ct = Json::array();
      for (const OneParamSubgroup& g : pf.torus_generators)
        ct.push_back(iod::canonical_form_json(g.form));
      canon["torus"] = std::move(ct);
    }
    if (doc.contains("tasks")) canon["tasks"] = doc.at("tasks");
  }
  pf.canonical = std::move(canon);
  return pf;
}

inline ProblemFile parse_problem_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(Errc::ParseError, "cannot open input file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem_text(buf.str());
}

inline std::string serialize_problem(const ProblemFile& pf) {
  return pf.canonical.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Reports

struct ReportRow {
  int task = 0;
  std::string command;
  std::string target;
  std::string quantity;
  std::optional<Rat> exact;
  std::string note;
};

struct Report {
  std::vector<ReportRow> rows;
  bool domain_failure = false;

  std::string to_csv() const {
    std::string out = "task,command,target,quantity,exact,decimal,note\n";
    for (const ReportRow& r : rows) {
      std::string note = r.note;
      for (char& ch : note)
        if (ch == ',' || ch == '\n') ch = ';';
      out += std::to_string(r.task) + "," + r.command + "," + r.target + "," +
             r.quantity + ",";
      out += r.exact ? rat_to_string(*r.exact) : "";
      out += ",";
      out += r.exact ? rat_to_decimal(*r.exact) : "";
      out += "," + note + "\n";
    }
    return out;
  }

  std::string to_table() const {
    const std::vector<std::string> headers = {"task",  "command", "target",
                                              "quantity", "exact", "decimal",
                                              "note"};
    std::vector<std::vector<std::string>> cells;
    for (const ReportRow& r : rows)
      cells.push_back({std::to_string(r.task), r.command, r.target,
                       r.quantity, r.exact ? rat_to_string(*r.exact) : "",
                       r.exact ? rat_to_decimal(*r.exact) : "", r.note});
    std::vector<std::size_t> width(headers.size());
    for (std::size_t j = 0; j < headers.size(); ++j) width[j] = headers[j].size();
    for (const auto& row : cells)
      for (std::size_t j = 0; j < row.size(); ++j)
        width[j] = std::max(width[j], row[j].size());
    auto emit_row = [&width](const std::vector<std::string>& row) {
      std::string line;
      for (std::size_t j = 0; j < row.size(); ++j) {
        line += row[j];
        if (j + 1 < row.size())
          line += std::string(width[j] - row[j].size() + 2, ' ');
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      return line + "\n";
    };
    std::string out = emit_row(headers);
    for (const auto& row : cells) out += emit_row(row);
    return out;
  }
};

namespace io_detail {

inline void push_value(std::vector<ReportRow>& rows, int task,
                       const std::string& command, const std::string& target,
                       const std::string& quantity, const Rat& value,
                       const std::string& note = "") {
  rows.push_back(ReportRow{task, command, target, quantity, value, note});
}

inline void push_note(std::vector<ReportRow>& rows, int task,
                      const std::string& command, const std::string& target,
                      const std::string& quantity, const std::string& note) {
  rows.push_back(ReportRow{task, command, target, quantity, std::nullopt,
                           note});
}

inline std::vector<ReportRow> run_check(const ProblemFile& pf, int index,
                                        bool& failed);

inline std::vector<ReportRow> run_one(const ProblemFile& pf, const Task& task,
                                      int index, bool& domain_failure) {
  std::vector<ReportRow> rows;
  const std::string& cmd = task.command;
  const LatticePolytope& poly = *pf.polytope;
  const int n = poly.dim();
  auto need_filtration = [&]() -> const Filtration& {
    auto name = task.arg("filtration");
    if (!name)
      throw Error(Errc::ValidationError,
                  cmd + " needs --filtration NAME");
    return pf.filtration(*name);
  };
  auto target_name = [&]() { return task.arg("filtration").value_or(""); };

  if (cmd == "hilbert") {
    const int kmax = task.int_arg("k", 2 * n + 2);
    const WeightPolynomial eh = ehrhart_fit(poly);
    for (int k = 1; k <= kmax; ++k)
      push_value(rows, index, cmd, "polytope", "h(" + std::to_string(k) + ")",
                 Rat(hilbert_count(poly, k)));
    for (int i = n; i >= 0; --i)
      push_value(rows, index, cmd, "polytope",
                 "a" + std::to_string(n - i) + " (coeff of k^" +
                     std::to_string(i) + ")",
                 eh.coeff(i));
    push_value(rows, index, cmd, "polytope", "volume", poly.volume());
  } else if (cmd == "invariants") {
    const Filtration& f = need_filtration();
    std::optional<TorusBasis> torus;
    if (!pf.torus_generators.empty()) torus.emplace(pf.torus_basis());
    const InvariantReport rep = full_report(f, torus ? &*torus : nullptr);
    const std::string t = target_name();
    push_value(rows, index, cmd, t, "a0", rep.a0);
    push_value(rows, index, cmd, t, "a1", rep.a1);
    push_value(rows, index, cmd, t, "b0", rep.b0);
    push_value(rows, index, cmd, t, "c0", rep.c0);
    if (rep.b1) push_value(rows, index, cmd, t, "b1", *rep.b1);
    if (rep.weight_period)
      push_note(rows, index, cmd, t, "weight_period",
                *rep.weight_period == 0 ? "none <= 4"
                                        : std::to_string(*rep.weight_period));
    push_value(rows, index, cmd, t, "norm2", rep.norm2);
    push_value(rows, index, cmd, t, "mean", rep.mean);
    push_value(rows, index, cmd, t, "e_max", rep.e_max);
    push_value(rows, index, cmd, t, "M_F", rep.m_inf);
    if (rep.df_value) push_value(rows, index, cmd, t, "df", *rep.df_value);
    if (rep.df_rel_value)
      push_value(rows, index, cmd, t, "df_rel", *rep.df_rel_value);
    if (rep.reduced)
      push_value(rows, index, cmd, t, "reduced_norm2", *rep.reduced);
    for (std::size_t i = 0; i < rep.inner_products.size(); ++i)
      push_value(rows, index, cmd, t, "inner(beta_" + std::to_string(i) + ")",
                 rep.inner_products[i]);
    if (rep.lambda) {
      push_value(rows, index, cmd, t, "lambda", *rep.lambda);
      push_value(rows, index, cmd, t, "delta_bound", *rep.delta_bound);
    }
    if (auto karg = task.arg("k")) {
      const int k = task.int_arg("k", 0);
      const int p = task.int_arg("p", 1);
      push_value(rows, index, cmd, t,
                 "w_" + std::to_string(p) + "(" + *karg + ")",
                 Rat(weight_sum(f, k, p)));
    }
  } else if (cmd == "df") {
    push_value(rows, index, cmd, target_name(), "df", df(need_filtration()));
  } else if (cmd == "df-rel") {
    push_value(rows, index, cmd, target_name(), "df_rel",
               df_rel(need_filtration(), pf.torus_basis()));
  } else if (cmd == "futaki") {
    const Filtration& f = need_filtration();
    if (f.kind() != Filtration::Kind::MinAffine || f.forms().size() != 1)
      throw Error(Errc::UnsupportedKind,
                  "futaki needs a one-parameter subgroup (a single-form "
                  "min_affine filtration)");
    push_value(rows, index, cmd, target_name(), "futaki",
               futaki(OneParamSubgroup{f.forms().front()}, pf.polytope));
  } else if (cmd == "chow") {
    const int r = task.int_arg("r", 1);
    push_value(rows, index, cmd, target_name(),
               "chow_" + std::to_string(r), chow(need_filtration(), r));
  } else if (cmd == "chow-rel") {
    const int r = task.int_arg("r", 1);
    push_value(rows, index, cmd, target_name(),
               "chow_rel_" + std::to_string(r),
               chow_rel(need_filtration(), pf.torus_basis(), r));
  } else if (cmd == "approx") {
    const int r = task.int_arg("r", 2);
    const Filtration fr = approximate(need_filtration(), r);
    const std::string t = target_name();
    push_value(rows, index, cmd, t, "table_size",
               Rat(Int(fr.generated_table().size())));
    push_value(rows, index, cmd, t, "w(1)", Rat(weight_sum(fr, 1, 1)));
    push_value(rows, index, cmd, t, "chow_1(F_(r))", chow(fr, 1));
    push_value(rows, index, cmd, t, "chow_r(F)",
               chow(need_filtration(), r));
  } else if (cmd == "blowup") {
    const int m = task.int_arg("m", 2);
    const std::size_t vertex =
        static_cast<std::size_t>(task.int_arg("vertex", 0));
    const Filtration& f = need_filtration();
    const BlowupBody body = blowup_body(pf.polytope, vertex, m);
    const Filtration hat = blowup_filtration(f, body);
    const std::string t = target_name();
    push_value(rows, index, cmd, t, "vol", body.volume());
    Int m_pow_n = 1;
    for (int i = 0; i < n; ++i) m_pow_n *= m;
    push_value(rows, index, cmd, t, "m^n vol(P) - 1/n!",
               Rat(m_pow_n) * poly.volume() - Rat(1, factorial(n)));
    const int kmax = task.int_arg("k", 3);
    for (int k = 1; k <= kmax; ++k)
      push_value(rows, index, cmd, t, "h_hat(" + std::to_string(k) + ")",
                 Rat(hilbert_count(hat.domain(), k)));
    push_value(rows, index, cmd, t, "w_hat(1)", Rat(weight_sum(hat, 1, 1)));
  } else if (cmd == "nu") {
    const int m = task.int_arg("m", 2);
    const int r = task.int_arg("r", 4 * n * m);
    const Filtration& f = need_filtration();
    const LambdaThreshold lt = lambda_threshold(f);
    const std::string t = target_name();
    push_value(rows, index, cmd, t, "lambda", lt.lambda);
    push_value(rows, index, cmd, t, "delta_bound", lt.delta_bound);
    push_value(rows, index, cmd, t, "nu", nu_weight(f, m, r, lt.lambda));
    if (!pf.torus_generators.empty())
      push_value(rows, index, cmd, t, "nu_rel",
                 nu_rel(f, pf.torus_basis(), m, r, lt.lambda));
  } else if (cmd == "chow-inf") {
    const int rmax = task.int_arg("r", 6);
    std::vector<int> rs;
    for (int r = 1; r <= rmax; ++r) rs.push_back(r);
    const Filtration& f = need_filtration();
    const std::string t = target_name();
    for (const auto& [r, value] :
         chow_inf_estimate(f, pf.torus_basis(), rs))
      push_value(rows, index, cmd, t,
                 "chow_1T(F_(" + std::to_string(r) + "))", value);
    try {
      push_value(rows, index, cmd, t, "df_rel",
                 df_rel(f, pf.torus_basis()));
    } catch (const Error& e) {
      if (e.code() != Errc::NotGood) throw;
      push_note(rows, index, cmd, t, "df_rel", e.what());
    }
  } else if (cmd == "cm-diff") {
    const Filtration& f = need_filtration();
    auto against = task.arg("against");
    if (!against)
      throw Error(Errc::ValidationError, "cm-diff needs --against NAME");
    push_value(rows, index, cmd,
               target_name() + " vs " + *against, "cm_difference",
               cm_difference(f, pf.filtration(*against)));
  } else if (cmd == "check") {
    bool failed = false;
    rows = run_check(pf, index, failed);
    if (failed) domain_failure = true;
  } else {
    throw Error(Errc::ValidationError, "unknown command \"" + cmd + "\"");
  }
  return rows;
}

inline std::vector<ReportRow> run_check(const ProblemFile& pf, int index,
                                        bool& failed) {
  std::vector<ReportRow> rows;
  auto verdict = [&rows, &failed, index](const std::string& target,
                                         const std::string& property,
                                         bool pass) {
    push_note(rows, index, "check", target, property, pass ? "PASS" : "FAIL");
    failed = failed || !pass;
  };
  const OneParamSubgroup probe =
      pf.torus_generators.empty()
          ? OneParamSubgroup{AffineForm{
                [&] {
                  IVec u(static_cast<std::size_t>(pf.polytope->dim()), Int(0));
                  u[0] = 1;
                  return u;
                }(),
                Int(0)}}
          : pf.torus_generators.front();

  for (const std::string& name : pf.filtration_order) {
    const Filtration& f = pf.filtration(name);
    {
      bool ok = true;
      for (int k = 1; k <= 4 && ok; ++k) {
        const auto hist = oracle::filtered_dims(f, k);
        Int m1 = 0, m2 = 0, card = 0;
        for (const auto& [lam, cnt] : hist) {
          m1 += lam * cnt;
          m2 += lam * lam * cnt;
          card += cnt;
        }
        ok = m1 == weight_sum(f, k, 1) && m2 == weight_sum(f, k, 2) &&
             card == hilbert_count(f.domain(), k);
      }
      verdict(name, "filtered-dims moments equal weight sums (k <= 4)", ok);
    }
    {
      bool ok = true;
      for (int k = 1; k <= 3 && ok; ++k) {
        const Rat mixed = oracle::t_sum(
            f, probe, k,
            [](const Int& l, const Int& mu) { return Rat(l * mu); });
        const Rat count = oracle::t_sum(
            f, probe, k, [](const Int&, const Int&) { return Rat(1); });
        ok = mixed == Rat(mixed_square_weight(f, probe, k)) &&
             count == Rat(hilbert_count(f.domain(), k));
      }
      verdict(name, "double-filtering T-sums match lattice sums (k <= 3)", ok);
    }
    {
      bool ok = true;
      std::string note;
      try {
        const Filtration fr = approximate(f, 2);
        const auto oracle_tab = oracle::generated_table(f, 2, 2);
        for (const auto& [a, v] : oracle_tab)
          ok = ok && fr.lattice_weight(2, a) == v;
      } catch (const Error& e) {
        if (e.code() != Errc::BudgetExceeded) throw;
        note = "skipped (budget)";
      }
      if (note.empty())
        verdict(name, "exhaustive decomposition equals DP closure (r=2,k=2)",
                ok);
      else
        push_note(rows, index, "check", name,
                  "exhaustive decomposition equals DP closure (r=2,k=2)",
                  note);
    }
    {
      const auto [b0, c0] = leading_coeffs(f);
      const auto gi =
          oracle::grid_integral(envelope_forms(f), f.domain(), 16);
      verdict(name, "grid integral brackets the exact b0 (N=16)",
              rat_abs(gi.estimate - b0) <= gi.bound);
    }
    if (!pf.torus_generators.empty()) {
      const TorusBasis torus = pf.torus_basis();
      const ReducedNorm red = reduced_norm2(f, torus);
      Rat radius = 2;
      for (const Rat& x : red.xi)
        radius = std::max(radius, rat_abs(x) + 1);
      const auto scan = oracle::reduced_min(f, torus, Rat(1, 4), radius);
      verdict(name, "reduced norm is the grid-scan minimum up to grid bound",
              red.value <= scan.min_value &&
                  scan.min_value - red.value <= scan.quad_bound);
    }
  }
  return rows;
}

}  // namespace io_detail

/// Executes the tasks (optionally fanning out across threads, capped by
/// max_threads) and assembles the report in task order, so output is
/// bit-stable regardless of scheduling.
inline Report run_tasks(const ProblemFile& pf, const std::vector<Task>& tasks,
                        int max_threads = 1) {
  Report report;
  std::vector<std::vector<ReportRow>> chunks(tasks.size());
  std::vector<char> failures(tasks.size(), 0);
  auto work = [&pf, &tasks, &chunks, &failures](std::size_t i) {
    bool domain_failure = false;
    try {
      chunks[i] = io_detail::run_one(pf, tasks[i], static_cast<int>(i),
                                     domain_failure);
    } catch (const Error& e) {
      chunks[i].push_back(ReportRow{static_cast<int>(i), tasks[i].command,
                                    tasks[i].arg("filtration").value_or(""),
                                    "error", std::nullopt, e.what()});
      domain_failure = true;
    }
    failures[i] = domain_failure ? 1 : 0;
  };
  if (max_threads <= 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
  } else {
    std::size_t next = 0;
    while (next < tasks.size()) {
      std::vector<std::future<void>> batch;
      for (int t = 0; t < max_threads && next < tasks.size(); ++t, ++next)
        batch.push_back(std::async(std::launch::async, work, next));
      for (auto& fut : batch) fut.get();
    }
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    report.rows.insert(report.rows.end(), chunks[i].begin(), chunks[i].end());
    report.domain_failure = report.domain_failure || failures[i];
  }
  return report;
}

}  // namespace kfiltr
