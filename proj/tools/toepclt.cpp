// toepclt — experiment runner for banded Toeplitz/Hankel trace statistics.
//
// Every subcommand reads a flat `key = value` config (optional, --config) whose
// keys can also be given as flags; flags win. Results go to
// <output_dir>/<name>.{json,csv,cfg}, and the JSON document is echoed to stdout.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "toepclt/integrals.hpp"
#include "toepclt/statistics.hpp"

using namespace toepclt;
using json = nlohmann::ordered_json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Keys

enum class KeyType { integer, unsigned_integer, real, boolean, text, real_list, int_list, interval_list };

struct KeySpec {
  const char* name;
  KeyType type;
  const char* fallback;  ///< "" means: resolved from other keys, or unset
  const char* help;
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> keys = {
      {"seed", KeyType::unsigned_integer, "1", "master seed"},
      {"timing", KeyType::boolean, "false", "add wall_time to records (breaks byte-identity)"},
      {"kind", KeyType::text, "toeplitz_real", "ensemble kind"},
      {"n", KeyType::integer, "512", "matrix size / corollary range"},
      {"band", KeyType::integer, "", "bandwidth b_n (default n-1)"},
      {"entry", KeyType::text, "gaussian", "gaussian | rademacher | uniform_sym | custom"},
      {"entry_values", KeyType::real_list, "", "support of a custom entry law"},
      {"entry_probs", KeyType::real_list, "", "probabilities of a custom entry law"},
      {"a0", KeyType::text, "zero", "diagonal policy: zero | sampled"},
      {"a0_entry", KeyType::text, "", "law of a sampled diagonal (default: entry)"},
      {"sparse", KeyType::interval_list, "", "diagonal index intervals lo-hi,... (sparse kinds)"},
      {"s", KeyType::integer, "1", "Wishart power"},
      {"r", KeyType::integer, "", "number of factors (multi_toeplitz; default 2)"},
      {"statistic", KeyType::text, "omega_p", "omega_p | omega_Q | zeta_p | zeta_Q | wishart_p | word | moment"},
      {"p", KeyType::integer, "2", "power"},
      {"q", KeyType::integer, "0", "second power (0: none)"},
      {"k", KeyType::integer, "1", "moment order M_{2k}"},
      {"coeffs", KeyType::real_list, "", "polynomial coefficients, index = power"},
      {"word", KeyType::int_list, "", "factor labels, 1-based"},
      {"replicates", KeyType::integer, "1000", "Monte Carlo replicates"},
      {"samples", KeyType::integer, "1000000", "MC samples per partition integral"},
      {"b", KeyType::real, "1", "limit bandwidth ratio in [0,1]"},
      {"limit_b", KeyType::real, "", "b used for the analytic side (default band/n)"},
      {"kappa", KeyType::real, "", "fourth moment (default from entry)"},
      {"flavor", KeyType::text, "real", "real | hermitian | hankel"},
      {"rule", KeyType::text, "exclude_coincident", "exclude_coincident | literal"},
      {"region", KeyType::interval_list, "", "B+ intervals inside [0,1]"},
      {"family", KeyType::text, "toeplitz", "toeplitz | wishart"},
      {"balance", KeyType::text, "toeplitz", "toeplitz | hankel"},
      {"threshold", KeyType::real, "4", "maximum |z| in compare"},
      {"list", KeyType::boolean, "false", "write every partition to CSV"},
      {"trials", KeyType::integer, "50", "random configurations per kind"},
      {"n_max", KeyType::integer, "10", "largest oracle matrix size"},
      {"band_max", KeyType::integer, "3", "largest oracle bandwidth"},
      {"p_max", KeyType::integer, "5", "largest oracle power"},
  };
  return keys;
}

const KeySpec& key_spec(const std::string& name) {
  for (const auto& k : key_table())
    if (name == k.name) return k;
  throw ConfigError("unknown key: " + name);
}

const std::vector<std::string> kEnsembleKeys = {"kind", "n", "band", "entry", "entry_values", "entry_probs",
                                                "a0",   "a0_entry", "sparse", "s", "r"};

std::vector<std::string> command_keys(const std::string& cmd) {
  std::vector<std::string> k = {"seed", "timing"};
  auto add = [&](std::initializer_list<std::string> xs) { k.insert(k.end(), xs); };
  if (cmd == "partitions") add({"p", "q", "list"});
  if (cmd == "moment") add({"family", "k", "p", "s", "b", "samples", "region"});
  if (cmd == "covariance") add({"p", "q", "b", "kappa", "flavor", "rule", "word", "coeffs", "samples"});
  if (cmd == "simulate" || cmd == "compare") {
    k.insert(k.end(), kEnsembleKeys.begin(), kEnsembleKeys.end());
    add({"statistic", "p", "coeffs", "word", "replicates"});
  }
  if (cmd == "compare") add({"q", "limit_b", "kappa", "rule", "samples", "threshold"});
  if (cmd == "corollary") add({"p", "n", "entry", "entry_values", "entry_probs", "balance", "replicates"});
  if (cmd == "oracle-check") add({"kind", "entry", "trials", "n_max", "band_max", "p_max"});
  return k;
}

// ---------------------------------------------------------------------------
// Typed value parsing

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (v.empty() || pos != v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  std::uint64_t x = 0;
  try {
    if (!v.empty() && v[0] != '-') x = std::stoull(v, &pos, 0);
  } catch (...) {
    pos = 0;
  }
  if (v.empty() || pos != v.size()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  return x;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (v.empty() || pos != v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.empty()) return out;
  for (const auto& x : split(v, ',')) out.push_back(parse_real(key, x));
  return out;
}

std::vector<int> parse_ints(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty()) return out;
  for (const auto& x : split(v, ',')) out.push_back(static_cast<int>(parse_int(key, x)));
  return out;
}

std::vector<std::pair<double, double>> parse_intervals(const std::string& key, const std::string& v) {
  std::vector<std::pair<double, double>> out;
  if (v.empty()) return out;
  for (const auto& item : split(v, ',')) {
    // "lo-hi" with non-negative bounds; the dash is the separator
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) throw ConfigError(key + ": expected lo-hi, got '" + item + "'");
    out.emplace_back(parse_real(key, trim(item.substr(0, dash))), parse_real(key, trim(item.substr(dash + 1))));
  }
  return out;
}

void check_type(const KeySpec& k, const std::string& v) {
  switch (k.type) {
    case KeyType::integer: (void)parse_int(k.name, v); break;
    case KeyType::unsigned_integer: (void)parse_uint(k.name, v); break;
    case KeyType::real: (void)parse_real(k.name, v); break;
    case KeyType::boolean: (void)parse_bool(k.name, v); break;
    case KeyType::text: break;
    case KeyType::real_list: (void)parse_reals(k.name, v); break;
    case KeyType::int_list: (void)parse_ints(k.name, v); break;
    case KeyType::interval_list: (void)parse_intervals(k.name, v); break;
  }
}

// ---------------------------------------------------------------------------
// Config

class Config {
 public:
  Config(std::string command, std::map<std::string, std::string> values)
      : command_(std::move(command)), values_(std::move(values)) {}

  [[nodiscard]] const std::string& command() const { return command_; }
  [[nodiscard]] bool has(const std::string& k) const {
    auto it = values_.find(k);
    return it != values_.end() && !it->second.empty();
  }
  [[nodiscard]] const std::string& str(const std::string& k) const {
    auto it = values_.find(k);
    if (it == values_.end()) throw ConfigError("missing key: " + k);
    return it->second;
  }
  [[nodiscard]] int integer(const std::string& k) const { return static_cast<int>(parse_int(k, str(k))); }
  [[nodiscard]] std::uint64_t uinteger(const std::string& k) const { return parse_uint(k, str(k)); }
  [[nodiscard]] double real(const std::string& k) const { return parse_real(k, str(k)); }
  [[nodiscard]] bool boolean(const std::string& k) const { return parse_bool(k, str(k)); }
  [[nodiscard]] std::vector<double> reals(const std::string& k) const { return parse_reals(k, str(k)); }
  [[nodiscard]] std::vector<int> ints(const std::string& k) const { return parse_ints(k, str(k)); }
  [[nodiscard]] std::vector<std::pair<double, double>> intervals(const std::string& k) const {
    return parse_intervals(k, str(k));
  }
  void set(const std::string& k, std::string v) { values_[k] = std::move(v); }

  /// Canonical file form; keys in table order, unset keys omitted.
  [[nodiscard]] std::string serialize() const {
    std::ostringstream os;
    os << "command = " << command_ << "\n";
    for (const auto& k : key_table()) {
      auto it = values_.find(k.name);
      if (it != values_.end() && !it->second.empty()) os << k.name << " = " << it->second << "\n";
    }
    return os.str();
  }
  [[nodiscard]] json to_json() const {
    json j;
    j["command"] = command_;
    for (const auto& k : key_table()) {
      auto it = values_.find(k.name);
      if (it != values_.end() && !it->second.empty()) j[k.name] = it->second;
    }
    return j;
  }
  [[nodiscard]] std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : serialize()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
  }

 private:
  std::string command_;
  std::map<std::string, std::string> values_;
};

std::map<std::string, std::string> read_config_file(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "command") {
      if (value != command) throw ConfigError(path + ": config is for '" + value + "', not '" + command + "'");
      continue;
    }
    if (out.count(key)) throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key " + key);
    out[key] = value;
  }
  return out;
}

/// Merges file and flag values, checks keys and types, and fills derived defaults.
Config resolve(const std::string& command, const std::map<std::string, std::string>& file,
               const std::map<std::string, std::string>& flags) {
  const auto allowed = command_keys(command);
  auto is_allowed = [&](const std::string& k) { return std::find(allowed.begin(), allowed.end(), k) != allowed.end(); };
  std::map<std::string, std::string> v;
  for (const auto& k : allowed) v[k] = key_spec(k).fallback;
  for (const auto* src : {&file, &flags})
    for (const auto& [k, val] : *src) {
      (void)key_spec(k);
      if (!is_allowed(k)) throw ConfigError("key '" + k + "' is not used by " + command);
      v[k] = val;
    }
  for (const auto& [k, val] : v)
    if (!val.empty()) check_type(key_spec(k), val);

  Config c(command, v);
  if (is_allowed("band") && !c.has("band")) c.set("band", std::to_string(c.integer("n") - 1));
  if (is_allowed("r") && !c.has("r")) c.set("r", c.str("kind") == "multi_toeplitz" ? "2" : "1");
  if (is_allowed("statistic") && c.str("statistic") == "word" && !c.has("word")) c.set("word", "1,2,1,2");
  return c;
}

// ---------------------------------------------------------------------------
// Building library objects from a config

EntryDistribution entry_of(const Config& c) {
  const auto& name = c.str("entry");
  if (name == "custom") {
    if (!c.has("entry_values") || !c.has("entry_probs")) throw ConfigError("custom entries need entry_values and entry_probs");
    return EntryDistribution::custom(c.reals("entry_values"), c.reals("entry_probs"));
  }
  if (c.has("entry_values") || c.has("entry_probs")) throw ConfigError("entry_values/entry_probs need entry = custom");
  return EntryDistribution::from_name(name);
}

EnsembleSpec spec_of(const Config& c) {
  EnsembleSpec s;
  s.kind = ensemble_kind_from_string(c.str("kind"));
  s.n = c.integer("n");
  s.band = c.integer("band");
  s.entry = entry_of(c);
  const auto& a0 = c.str("a0");
  if (a0 == "sampled") s.a0 = A0Policy::sampled;
  else if (a0 != "zero") throw ConfigError("a0 must be zero or sampled");
  if (c.has("a0_entry")) {
    if (s.a0 != A0Policy::sampled) throw ConfigError("a0_entry needs a0 = sampled");
    s.diagonal = EntryDistribution::from_name(c.str("a0_entry"));
  }
  for (const auto& [lo, hi] : c.intervals("sparse")) {
    if (lo != std::floor(lo) || hi != std::floor(hi)) throw ConfigError("sparse intervals take integer diagonal indices");
    s.sparse.emplace_back(static_cast<int>(lo), static_cast<int>(hi));
  }
  s.s = c.integer("s");
  s.r = c.integer("r");
  s.validate();
  return s;
}

StatisticRequest request_of(const Config& c, int p) {
  StatisticRequest q;
  q.kind = statistic_kind_from_string(c.str("statistic"));
  q.p = p;
  q.coeffs = c.reals("coeffs");
  q.word = c.ints("word");
  return q;
}

CovarianceFlavor flavor_of(const std::string& f) {
  if (f == "real") return CovarianceFlavor::real;
  if (f == "hermitian") return CovarianceFlavor::hermitian;
  if (f == "hankel") return CovarianceFlavor::hankel;
  throw ConfigError("flavor must be real, hermitian or hankel");
}

TypeIRule rule_of(const std::string& r) {
  if (r == "exclude_coincident") return TypeIRule::exclude_coincident;
  if (r == "literal") return TypeIRule::literal;
  throw ConfigError("rule must be exclude_coincident or literal");
}

// ---------------------------------------------------------------------------
// Results

struct Record {
  std::string quantity;
  double value = 0;
  std::optional<double> std_error;
  std::optional<double> reference;
  std::optional<double> reference_error;
  std::optional<double> wall_time;

  [[nodiscard]] std::optional<double> z() const {
    if (!reference) return std::nullopt;
    const double e = std::hypot(std_error.value_or(0.0), reference_error.value_or(0.0));
    if (e == 0.0) return std::nullopt;
    return (value - *reference) / e;
  }
};

struct Output {
  std::vector<Record> records;
  json extra = json::object();
  std::vector<std::string> csv_header;
  std::vector<std::vector<std::string>> csv_rows;
  int exit_code = 0;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void add_replicates(Output& out, std::span<const double> xs) {
  out.csv_header = {"replicate_index", "value"};
  for (std::size_t i = 0; i < xs.size(); ++i) out.csv_rows.push_back({std::to_string(i), fmt(xs[i])});
}

void add_summary(Output& out, const std::string& prefix, std::span<const double> xs) {
  try {
    const auto s = summarize(xs);
    out.records.push_back({prefix + "variance", s.variance, s.variance_std_error, {}, {}, {}});
    out.records.push_back({prefix + "skewness", s.skewness, s.skewness_std_error, {}, {}, {}});
    out.records.push_back({prefix + "excess_kurtosis", s.excess_kurtosis, s.kurtosis_std_error, {}, {}, {}});
    out.records.push_back({prefix + "jarque_bera", s.jarque_bera, {}, {}, {}, {}});
  } catch (const ContractViolation&) {
    out.records.push_back({prefix + "variance", 0.0, 0.0, {}, {}, {}});
    out.extra[prefix + "degenerate"] = true;
  }
}

// ---------------------------------------------------------------------------
// Commands

Output cmd_partitions(const Config& c) {
  Output out;
  const int p = c.integer("p"), q = c.integer("q");
  if (p < 1 || q < 0) throw ConfigError("partitions needs p >= 1 and q >= 0");
  const int m = p + q;
  const auto all = enumerate_pair_partitions(m);
  out.records.push_back({"pair_partitions", static_cast<double>(all.size()), {},
                         m % 2 == 0 ? std::optional<double>(static_cast<double>(double_factorial(m - 1))) : 0.0, {}, {}});
  if (c.boolean("list")) out.csv_header = {"family", "index", "partition"};
  auto list = [&](const std::string& family, std::size_t i, const Partition& pi) {
    if (c.boolean("list")) out.csv_rows.push_back({family, std::to_string(i), pi.to_string()});
  };
  for (std::size_t i = 0; i < all.size(); ++i) list("pair", i, all[i].partition());
  if (q >= 1) {
    const auto cross = enumerate_crossing_pair_partitions(p, q);
    const auto p24 = enumerate_p24(p, q);
    std::optional<double> cross_ref, p24_ref;
    const auto df = [](int k) { return static_cast<double>(double_factorial(k)); };
    if (p % 2 == 0 && q % 2 == 0) {
      cross_ref = df(m - 1) - df(p - 1) * df(q - 1);
      p24_ref = df(p - 1) * df(q - 1) * (p / 2) * (q / 2);
    } else if (p % 2 == 1 && q % 2 == 1) {
      cross_ref = df(m - 1);
      p24_ref = 0.0;
    } else {
      cross_ref = p24_ref = 0.0;
    }
    out.records.push_back({"crossing_pair_partitions", static_cast<double>(cross.size()), {}, cross_ref, {}, {}});
    out.records.push_back({"four_block_partitions", static_cast<double>(p24.size()), {}, p24_ref, {}, {}});
    for (std::size_t i = 0; i < cross.size(); ++i) list("crossing", i, cross[i].partition());
    for (std::size_t i = 0; i < p24.size(); ++i) list("four_block", i, p24[i].partition());
  }
  for (const auto& r : out.records)
    if (r.reference && r.value != *r.reference) out.exit_code = 1;
  return out;
}

Output cmd_moment(const Config& c) {
  Output out;
  const double b = c.real("b");
  const auto samples = static_cast<std::int64_t>(c.integer("samples"));
  const auto seed = c.uinteger("seed");
  if (c.str("family") == "wishart") {
    if (c.has("region")) throw ConfigError("Wishart moments take no region");
    const int p = c.integer("p"), s = c.integer("s");
    const auto w = wishart_limit_moment(p, s, b, samples, seed);
    Record r{"wishart_moment", w.value.value, w.value.std_error, {}, {}, {}};
    if (b == 0.0) {
      double f = 1;
      for (int i = 2; i <= p * s; ++i) f *= i;
      r.reference = std::pow(2.0, p * s) * f;
    }
    out.records.push_back(r);
    out.extra["surviving_partitions"] = w.surviving_partitions;
    return out;
  }
  if (c.str("family") != "toeplitz") throw ConfigError("family must be toeplitz or wishart");
  const int k = c.integer("k");
  const auto iv = c.intervals("region");
  const SamplingRegion region = iv.empty() ? SamplingRegion{} : SamplingRegion(iv);
  const auto m = limit_moment(k, b, samples, seed, region);
  Record r{"moment_" + std::to_string(2 * k), m.value, m.std_error, {}, {}, {}};
  if (region.is_full() && b == 0.0) r.reference = std::pow(2.0, k) * static_cast<double>(double_factorial(2 * k - 1));
  if (region.is_full() && k == 1) r.reference = 2.0 - b;
  out.records.push_back(r);
  return out;
}

CovarianceQuery covariance_query(const Config& c, int p, int q, double b, double kappa, CovarianceFlavor flavor) {
  CovarianceQuery query;
  query.p = p;
  query.q = q;
  query.b = b;
  query.kappa = kappa;
  query.flavor = flavor;
  query.rule = rule_of(c.str("rule"));
  query.samples = c.integer("samples");
  query.seed = derive_key(c.uinteger("seed"), 0xA7A1);
  return query;
}

Output cmd_covariance(const Config& c) {
  Output out;
  if (!c.has("kappa")) throw ConfigError("covariance needs kappa");
  const auto flavor = flavor_of(c.str("flavor"));
  auto query = covariance_query(c, c.integer("p"), c.integer("q") == 0 ? c.integer("p") : c.integer("q"), c.real("b"),
                                c.real("kappa"), flavor);
  query.seed = c.uinteger("seed");
  if (c.has("coeffs")) {
    if (c.has("word")) throw ConfigError("coeffs and word are exclusive");
    const auto coeffs = c.reals("coeffs");
    const auto v = limit_variance_polynomial(coeffs, query);
    out.records.push_back({"variance_polynomial", v.value, v.std_error, {}, {}, {}});
    return out;
  }
  if (c.has("word")) {
    auto w = c.ints("word");
    auto both = w;
    both.insert(both.end(), w.begin(), w.end());
    query.p = query.q = static_cast<int>(w.size());
    query.coloring = coloring_from_word(both);
  }
  const auto e = limit_covariance(query);
  out.records.push_back({"type_one", e.type_one.value, e.type_one.std_error, {}, {}, {}});
  out.records.push_back({"type_two", e.type_two.value, e.type_two.std_error, {}, {}, {}});
  const auto t = e.total();
  out.records.push_back({"covariance", t.value, t.std_error, {}, {}, {}});
  out.extra["type_one_terms"] = e.type_one_terms;
  out.extra["type_one_excluded"] = e.type_one_excluded;
  out.extra["type_two_terms"] = e.type_two_terms;
  return out;
}

Output cmd_simulate(const Config& c) {
  Output out;
  const auto spec = spec_of(c);
  const auto ts = run_statistic(spec, request_of(c, c.integer("p")), c.integer("replicates"), c.uinteger("seed"));
  out.records.push_back({"raw_mean", ts.raw_mean, {}, {}, {}, {}});
  add_summary(out, "", ts.replicates);
  add_replicates(out, ts.replicates);
  out.extra["centring"] = ts.request.kind == StatisticKind::moment ? "none" : "replicate_mean";
  return out;
}

Output cmd_corollary(const Config& c) {
  Output out;
  const auto& bal = c.str("balance");
  if (bal != "toeplitz" && bal != "hankel") throw ConfigError("balance must be toeplitz or hankel");
  const auto kind = bal == "hankel" ? BalanceKind::hankel : BalanceKind::toeplitz;
  const auto cs = corollary_sum_statistic(c.integer("p"), c.integer("n"), entry_of(c), kind, c.integer("replicates"),
                                          c.uinteger("seed"));
  out.records.push_back({"expectation", cs.expectation, {}, {}, {}, {}});
  add_summary(out, "", cs.replicates);
  add_replicates(out, cs.replicates);
  return out;
}

Output cmd_oracle_check(const Config& c) {
  Output out;
  std::vector<EnsembleKind> kinds;
  if (c.str("kind") == "all") {
    kinds = {EnsembleKind::toeplitz_real, EnsembleKind::toeplitz_hermitian, EnsembleKind::hankel,
             EnsembleKind::sparse_toeplitz, EnsembleKind::sparse_hankel, EnsembleKind::wishart,
             EnsembleKind::multi_toeplitz};
  } else {
    kinds = {ensemble_kind_from_string(c.str("kind"))};
  }
  const int trials = c.integer("trials"), n_max = c.integer("n_max"), band_max = c.integer("band_max"),
            p_max = c.integer("p_max");
  if (trials < 1 || n_max < 2 || band_max < 1 || p_max < 1) throw ConfigError("oracle-check sizes must be positive");
  const auto entry = EntryDistribution::from_name(c.str("entry"));
  SequentialStream rng(derive_key(c.uinteger("seed"), 0x0AC1E));
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.next_bits() % static_cast<std::uint64_t>(hi - lo + 1)); };
  int checks = 0, failures = 0;
  double worst = 0;
  out.csv_header = {"kind", "trial", "n", "band", "p", "fast", "oracle", "rel_error"};
  for (auto kind : kinds) {
    for (int t = 0; t < trials; ++t) {
      EnsembleSpec s;
      s.kind = kind;
      s.n = pick(2, n_max);
      s.band = pick(1, std::min(band_max, s.n - 1));
      s.entry = entry;
      s.a0 = pick(0, 1) ? A0Policy::sampled : A0Policy::zero;
      if (s.is_sparse()) {
        const int lo = pick(0, s.band);
        s.sparse = {{lo, pick(lo, s.band)}};
      }
      int p = pick(1, p_max);
      if (kind == EnsembleKind::wishart) p = std::min(p, 4);  // 2ps letters
      if (kind == EnsembleKind::multi_toeplitz) s.r = 2;
      const auto op = sample(s, derive_key(c.uinteger("seed"), {static_cast<std::uint64_t>(kind), static_cast<std::uint64_t>(t)}));
      double fast = 0, oracle = 0;
      if (kind == EnsembleKind::multi_toeplitz) {
        std::vector<int> word(static_cast<std::size_t>(std::max(p, 2)));
        for (auto& l : word) l = pick(1, 2);
        fast = trace_word(op, word);
        oracle = combinatorial_trace_oracle(op, word);
      } else {
        fast = trace_power(op, p);
        oracle = combinatorial_trace_oracle(op, p);
      }
      const double rel = std::abs(fast - oracle) / std::max(1.0, std::abs(oracle));
      worst = std::max(worst, rel);
      ++checks;
      if (!(rel <= 1e-9)) ++failures;
      out.csv_rows.push_back({to_string(kind), std::to_string(t), std::to_string(s.n), std::to_string(s.band),
                              std::to_string(p), fmt(fast), fmt(oracle), fmt(rel)});
    }
  }
  out.records.push_back({"checks", static_cast<double>(checks), {}, {}, {}, {}});
  out.records.push_back({"failures", static_cast<double>(failures), {}, 0.0, {}, {}});
  out.records.push_back({"max_rel_error", worst, {}, {}, {}, {}});
  if (failures > 0) out.exit_code = 1;
  return out;
}

Output cmd_compare(const Config& c) {
  Output out;
  const auto spec = spec_of(c);
  const int p = c.integer("p"), q = c.integer("q");
  const auto seed = c.uinteger("seed");
  const int R = c.integer("replicates");
  const double limit_b = c.has("limit_b") ? c.real("limit_b") : spec.b();
  const double kappa = c.has("kappa") ? c.real("kappa") : (spec.is_complex() ? spec.entry.complex_kappa() : spec.entry.kappa());
  const auto req = request_of(c, p);
  const auto flavor = spec.is_complex() ? CovarianceFlavor::hermitian
                      : spec.is_hankel() ? CovarianceFlavor::hankel
                                          : CovarianceFlavor::real;
  out.extra["limit_b"] = limit_b;
  out.extra["kappa"] = kappa;

  // Analytic guards come first: no simulation is started for an unsupported target.
  const bool sparse = spec.is_sparse();
  if (req.kind == StatisticKind::wishart_p) throw ConfigError("compare supports Wishart ensembles through statistic = moment");
  if (sparse && req.kind != StatisticKind::moment) throw ConfigError("sparse ensembles are compared through statistic = moment");
  if (q != 0 && (req.kind != StatisticKind::omega_p && req.kind != StatisticKind::zeta_p))
    throw ConfigError("q is only meaningful for omega_p and zeta_p");
  if (spec.a0 == A0Policy::sampled && req.kind != StatisticKind::moment)
    out.extra["note"] = "sampled diagonal: the limit is a Gaussian mixture, the covariance reference ignores a0";
  if (req.kind == StatisticKind::moment && spec.is_hankel()) throw ConfigError("moment comparison needs a Toeplitz or Wishart ensemble");
  if (req.kind == StatisticKind::moment && spec.kind == EnsembleKind::toeplitz_hermitian)
    throw ConfigError("moment comparison needs a real Toeplitz or Wishart ensemble");
  if (req.kind == StatisticKind::moment && spec.kind == EnsembleKind::multi_toeplitz)
    throw ConfigError("moment comparison needs a single operator");

  std::vector<StatisticRequest> reqs{req};
  if (q != 0 && q != p) reqs.push_back(request_of(c, q));
  const auto t0 = std::chrono::steady_clock::now();
  const auto stats = run_statistics(spec, reqs, R, seed);
  const double sim_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto t1 = std::chrono::steady_clock::now();

  if (req.kind == StatisticKind::moment) {
    const auto& xs = stats[0].replicates;
    double var = 0;
    for (double x : xs) var += (x - stats[0].raw_mean) * (x - stats[0].raw_mean);
    var /= (R - 1.0);
    Record r{"moment", stats[0].raw_mean, std::sqrt(var / R), {}, {}, {}};
    if (spec.kind == EnsembleKind::wishart) {
      const auto w = wishart_limit_moment(p, spec.s, limit_b, c.integer("samples"), derive_key(seed, 0xA7A1));
      r.reference = w.value.value;
      r.reference_error = w.value.std_error;
    } else if (p % 2 == 1) {
      r.reference = 0.0;
    } else {
      SamplingRegion region;
      if (sparse) {
        std::vector<std::pair<double, double>> iv;
        for (const auto& [lo, hi] : spec.sparse)
          iv.emplace_back(static_cast<double>(lo) / spec.band, static_cast<double>(hi) / spec.band);
        region = SamplingRegion(iv);
      }
      const auto m = limit_moment(p / 2, limit_b, c.integer("samples"), derive_key(seed, 0xA7A1), region);
      r.reference = m.value;
      r.reference_error = m.std_error;
    }
    out.records.push_back(r);
    add_replicates(out, xs);
  } else if (reqs.size() == 2) {
    const auto cov = sample_covariance(stats[0].replicates, stats[1].replicates);
    auto query = covariance_query(c, p, q, limit_b, kappa, flavor);
    const auto e = limit_covariance(query).total();
    out.records.push_back({"covariance", cov.value, cov.std_error, e.value, e.std_error, {}});
    out.csv_header = {"replicate_index", "value_p", "value_q"};
    for (int i = 0; i < R; ++i)
      out.csv_rows.push_back({std::to_string(i), fmt(stats[0].replicates[static_cast<std::size_t>(i)]),
                              fmt(stats[1].replicates[static_cast<std::size_t>(i)])});
  } else {
    MCEstimate ref;
    auto query = covariance_query(c, p, p, limit_b, kappa, flavor);
    switch (req.kind) {
      case StatisticKind::omega_p:
      case StatisticKind::zeta_p: ref = limit_covariance(query).total(); break;
      case StatisticKind::omega_Q:
      case StatisticKind::zeta_Q: ref = limit_variance_polynomial(req.coeffs, query); break;
      case StatisticKind::word: {
        auto both = req.word;
        both.insert(both.end(), req.word.begin(), req.word.end());
        query.p = query.q = static_cast<int>(req.word.size());
        query.coloring = coloring_from_word(both);
        ref = limit_covariance(query).total();
        break;
      }
      default: throw ConfigError("unsupported statistic for compare");
    }
    add_summary(out, "", stats[0].replicates);
    for (auto& r : out.records) {
      if (r.quantity == "variance") {
        r.reference = ref.value;
        r.reference_error = ref.std_error;
      } else if (r.quantity == "skewness" || r.quantity == "excess_kurtosis") {
        r.reference = 0.0;
      }
    }
    add_replicates(out, stats[0].replicates);
  }
  const double analytic_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  if (c.boolean("timing")) {
    out.extra["simulation_seconds"] = sim_time;
    out.extra["analytic_seconds"] = analytic_time;
  }
  const double threshold = c.real("threshold");
  for (const auto& r : out.records)
    if (auto z = r.z(); z && std::abs(*z) > threshold) out.exit_code = 1;
  return out;
}

// ---------------------------------------------------------------------------
// Output

std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TOEPCLT_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

json document(const Config& c, const Output& out) {
  json doc;
  doc["command"] = c.command();
  doc["config_hash"] = c.hash();
  doc["master_seed"] = c.uinteger("seed");
  doc["config"] = c.to_json();
  json recs = json::array();
  for (const auto& r : out.records) {
    json j;
    j["config_hash"] = c.hash();
    j["quantity"] = r.quantity;
    j["value"] = r.value;
    if (r.std_error) j["std_error"] = *r.std_error;
    if (r.reference) j["analytic_reference"] = *r.reference;
    if (r.reference_error) j["analytic_std_error"] = *r.reference_error;
    if (auto z = r.z()) j["z_score"] = *z;
    if (r.wall_time) j["wall_time"] = *r.wall_time;
    recs.push_back(j);
  }
  doc["records"] = recs;
  if (!out.extra.empty()) doc["details"] = out.extra;
  return doc;
}

void write_outputs(const Config& c, const Output& out, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto doc = document(c, out);
  {
    std::ofstream f(dir / (name + ".json"), std::ios::binary);
    f << doc.dump(2) << "\n";
  }
  {
    std::ofstream f(dir / (name + ".cfg"), std::ios::binary);
    f << "# resolved config, hash " << c.hash() << "\n" << c.serialize();
  }
  if (!out.csv_header.empty()) {
    std::ofstream f(dir / (name + ".csv"), std::ios::binary);
    json meta;
    meta["command"] = c.command();
    meta["config_hash"] = c.hash();
    meta["master_seed"] = c.uinteger("seed");
    meta["config"] = c.to_json();
    f << "# " << meta.dump() << "\n";
    for (std::size_t i = 0; i < out.csv_header.size(); ++i) f << (i ? "," : "") << out.csv_header[i];
    f << "\n";
    for (const auto& row : out.csv_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << row[i];
      f << "\n";
    }
  }
  std::cout << doc.dump(2) << "\n";
}

using Handler = Output (*)(const Config&);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace statistics of banded Toeplitz and Hankel random matrices"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, Handler>> commands = {
      {"partitions", cmd_partitions}, {"moment", cmd_moment},   {"covariance", cmd_covariance},
      {"simulate", cmd_simulate},     {"corollary", cmd_corollary}, {"oracle-check", cmd_oracle_check},
      {"compare", cmd_compare},
  };
  const std::map<std::string, std::string> descriptions = {
      {"partitions", "enumerate pair partitions and crossing families"},
      {"moment", "limit spectral moment by Monte Carlo integration"},
      {"covariance", "limit covariance of trace statistics"},
      {"simulate", "replicate a centred trace statistic"},
      {"corollary", "replicate the balanced coefficient sum"},
      {"oracle-check", "compare fast traces with the combinatorial oracle"},
      {"compare", "analytic limit against simulation, with z-scores"},
  };

  struct Slot {
    std::string config, output, name;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, Slot> slots;
  for (const auto& [cmd, handler] : commands) {
    auto* sub = app.add_subcommand(cmd, descriptions.at(cmd));
    auto& slot = slots[cmd];
    sub->add_option("--config", slot.config, "key = value config file");
    sub->add_option("--output-dir", slot.output, "output directory (default $TOEPCLT_OUTPUT_DIR or .)");
    sub->add_option("--name", slot.name, "output file stem (default: the command)");
    for (const auto& key : command_keys(cmd))
      slot.options[key] = sub->add_option("--" + key, slot.flags[key], key_spec(key).help);
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& [cmd, handler] : commands) {
    auto* sub = app.get_subcommand(cmd);
    if (!sub->parsed()) continue;
    auto& slot = slots[cmd];
    try {
      std::map<std::string, std::string> flags;
      for (const auto& [key, opt] : slot.options)
        if (opt->count() > 0) flags[key] = trim(slot.flags[key]);
      const auto file = slot.config.empty() ? std::map<std::string, std::string>{} : read_config_file(slot.config, cmd);
      const Config config = resolve(cmd, file, flags);
      const auto t0 = std::chrono::steady_clock::now();
      Output out = handler(config);
      if (config.boolean("timing")) {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (auto& r : out.records) r.wall_time = wall;
      }
      write_outputs(config, out, output_dir(slot.output), slot.name.empty() ? cmd : slot.name);
      return out.exit_code;
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    } catch (const ContractViolation& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 2;
}
