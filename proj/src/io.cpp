#include "cammvp/io.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cammvp {

namespace {

constexpr const char* kProfileMagic = "# camm-vp profile v";
constexpr const char* kGridMagic = "# camm-vp grid v";
constexpr const char* kSnapshotMagic = "# camm-vp snapshot v";

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '\\')
      out += "\\\\";
    else if (c == '\n')
      out += "\\n";
    else
      out += c;
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      out += s[i + 1] == 'n' ? '\n' : s[i + 1];
      ++i;
    } else {
      out += s[i];
    }
  }
  return out;
}

// Split the text into body and checksum trailer, verifying the trailer.
std::string verified_body(const std::string& all, const std::string& what) {
  const auto tail = all.rfind("# checksum ");
  if (tail == std::string::npos) throw FormatError(what + ": checksum line missing (truncated file?)");
  std::string sum = all.substr(tail + 11);
  while (!sum.empty() && (sum.back() == '\n' || sum.back() == '\r')) sum.pop_back();
  const std::string body = all.substr(0, tail);
  if (sum != hex64(fnv1a64(body))) throw FormatError(what + ": checksum mismatch");
  return body;
}

void check_version(const std::string& all, const char* magic, const std::string& what) {
  const std::string m(magic);
  if (all.rfind(m, 0) != 0) throw FormatError("not a " + what + " file");
  const auto eol = all.find('\n');
  const std::string version = all.substr(m.size(), eol == std::string::npos ? std::string::npos : eol - m.size());
  if (version != "1")
    throw FormatError(what + " version " + version + " is not supported by this reader (expects v1)");
}

// "key=value key=value" pairs after a tag.
std::map<std::string, std::string> parse_pairs(std::istringstream& ls) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (ls >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed metadata token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

double need(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("metadata key '" + key + "' missing");
  return parse_double(it->second);
}

}  // namespace

void store_state(std::ostream& os, const AnsatzState& s) {
  std::ostringstream b;
  const CasimirModel& m = s.model;
  const FunctionalReport& r = s.report;
  b << kProfileMagic << "1\n";
  b << "# model c1=" << format_exact(m.c1) << " c2=" << format_exact(m.c2) << " k1=" << format_exact(m.k1)
    << " k2=" << format_exact(m.k2) << " l=" << format_exact(m.l) << " gamma=" << format_exact(m.gamma)
    << " f0_threshold=" << format_exact(m.f0_threshold) << '\n';
  b << "# state E0=" << format_exact(s.E0) << " central_psi=" << format_exact(s.central_psi)
    << " R_supp=" << format_exact(s.R_supp) << " mass=" << format_exact(s.mass) << " compact=" << s.compact
    << " admissible=" << s.admissible << " core_scale=" << format_exact(s.core_scale) << " steps=" << s.steps
    << " rejected_steps=" << s.rejected_steps << " iterations=" << s.iterations << '\n';
  b << "# report mass=" << format_exact(r.mass) << " kinetic=" << format_exact(r.kinetic)
    << " potential=" << format_exact(r.potential) << " casimir=" << format_exact(r.casimir)
    << " angular=" << format_exact(r.angular) << " positive=" << format_exact(r.positive)
    << " total=" << format_exact(r.total) << '\n';
  b << "# d_trace " << s.d_trace.size();
  for (double d : s.d_trace) b << ' ' << format_exact(d);
  b << '\n';
  b << "# note " << escape(s.note) << '\n';
  b << "# columns r U rho m\n";
  for (std::size_t i = 0; i < s.r.size(); ++i)
    b << format_exact(s.r[i]) << ' ' << format_exact(s.U[i]) << ' ' << format_exact(s.rho[i]) << ' '
      << format_exact(s.m[i]) << '\n';
  const std::string body = b.str();
  os << body << "# checksum " << hex64(fnv1a64(body)) << '\n';
  if (!os) throw std::runtime_error("failed to write profile");
}

AnsatzState load_state(std::istream& is) {
  const std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  check_version(all, kProfileMagic, "profile");
  const std::string body = verified_body(all, "profile");
  std::istringstream in(body);
  std::string line;
  std::getline(in, line);
  AnsatzState s;
  bool columns = false;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      std::istringstream ls(line.substr(2));
      std::string tag;
      ls >> tag;
      if (tag == "model") {
        const auto kv = parse_pairs(ls);
        s.model.c1 = need(kv, "c1");
        s.model.c2 = need(kv, "c2");
        s.model.k1 = need(kv, "k1");
        s.model.k2 = need(kv, "k2");
        s.model.l = need(kv, "l");
        s.model.gamma = need(kv, "gamma");
        s.model.f0_threshold = need(kv, "f0_threshold");
      } else if (tag == "state") {
        const auto kv = parse_pairs(ls);
        s.E0 = need(kv, "E0");
        s.central_psi = need(kv, "central_psi");
        s.R_supp = need(kv, "R_supp");
        s.mass = need(kv, "mass");
        s.compact = need(kv, "compact") != 0.0;
        s.admissible = need(kv, "admissible") != 0.0;
        s.core_scale = need(kv, "core_scale");
        s.steps = static_cast<int>(need(kv, "steps"));
        s.rejected_steps = static_cast<int>(need(kv, "rejected_steps"));
        s.iterations = static_cast<int>(need(kv, "iterations"));
      } else if (tag == "report") {
        const auto kv = parse_pairs(ls);
        s.report.mass = need(kv, "mass");
        s.report.kinetic = need(kv, "kinetic");
        s.report.potential = need(kv, "potential");
        s.report.casimir = need(kv, "casimir");
        s.report.angular = need(kv, "angular");
        s.report.positive = need(kv, "positive");
        s.report.total = need(kv, "total");
      } else if (tag == "d_trace") {
        std::size_t n = 0;
        ls >> n;
        s.d_trace.resize(n);
        std::string tok;
        for (std::size_t i = 0; i < n; ++i) {
          if (!(ls >> tok)) throw FormatError("d_trace shorter than declared");
          s.d_trace[i] = parse_double(tok);
        }
      } else if (tag == "note") {
        s.note = line.size() > 7 ? unescape(line.substr(7)) : std::string();
      } else if (tag == "columns") {
        columns = true;
      }
      continue;
    }
    if (!columns) throw FormatError("profile data before the column header");
    std::istringstream ls(line);
    std::string a, b, c, d;
    if (!(ls >> a >> b >> c >> d)) throw FormatError("profile row with fewer than four columns");
    s.r.push_back(parse_double(a));
    s.U.push_back(parse_double(b));
    s.rho.push_back(parse_double(c));
    s.m.push_back(parse_double(d));
  }
  if (s.r.empty()) throw FormatError("profile has no rows");
  return s;
}

void store_state(const std::filesystem::path& path, const AnsatzState& state) {
  std::ostringstream os;
  store_state(os, state);
  write_file(path, os.str());
}

AnsatzState load_state(const std::filesystem::path& path) {
  std::istringstream is(read_file(path));
  return load_state(is);
}

void store_grid(std::ostream& os, const GridDensity& f) {
  std::ostringstream b;
  b << kGridMagic << "1\n";
  b << "# rule " << to_string(f.r_axis().rule()) << '\n';
  b << "# shape " << f.nr() << ' ' << f.nu() << ' ' << f.nw() << '\n';
  auto axis = [&](const char* name, const std::vector<double>& x) {
    b << "# axis " << name;
    for (double v : x) b << ' ' << format_exact(v);
    b << '\n';
  };
  axis("r", f.r_grid().r());
  axis("u", f.u_axis().nodes());
  axis("w", f.w_axis().nodes());
  b << "# values row-major (r, u, w), one line per (r, u)\n";
  for (std::size_t i = 0; i < f.nr(); ++i)
    for (std::size_t j = 0; j < f.nu(); ++j) {
      for (std::size_t k = 0; k < f.nw(); ++k) b << (k ? " " : "") << format_exact(f(i, j, k));
      b << '\n';
    }
  const std::string body = b.str();
  os << body << "# checksum " << hex64(fnv1a64(body)) << '\n';
}

GridDensity load_grid(std::istream& is) {
  const std::string all((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  check_version(all, kGridMagic, "grid");
  const std::string body = verified_body(all, "grid");
  std::istringstream in(body);
  std::string line;
  std::getline(in, line);
  NodeRule rule = NodeRule::Cubic;
  std::size_t nr = 0, nu = 0, nw = 0;
  std::map<std::string, std::vector<double>> axes;
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::istringstream ls(line.rfind("# ", 0) == 0 ? line.substr(2) : line);
    if (line.rfind("# ", 0) == 0) {
      std::string tag;
      ls >> tag;
      if (tag == "rule") {
        std::string name;
        ls >> name;
        rule = node_rule_from_string(name);
      } else if (tag == "shape") {
        ls >> nr >> nu >> nw;
      } else if (tag == "axis") {
        std::string name, tok;
        ls >> name;
        while (ls >> tok) axes[name].push_back(parse_double(tok));
      }
      continue;
    }
    std::string tok;
    while (ls >> tok) values.push_back(parse_double(tok));
  }
  if (axes["r"].size() != nr || axes["u"].size() != nu || axes["w"].size() != nw)
    throw FormatError("grid axes do not match the declared shape");
  if (values.size() != nr * nu * nw) throw FormatError("grid value block does not match the declared shape");
  return GridDensity(RadialGrid(axes["r"], rule), AxisRule(axes["u"], rule), AxisRule(axes["w"], rule),
                     std::move(values));
}

void store_snapshot(const std::filesystem::path& path, const Snapshot& snap) {
  std::ostringstream b;
  const ParticleEnsemble& ens = snap.ensemble;
  b << kSnapshotMagic << "1\n";
  b << "# count " << ens.size() << '\n';
  b << "# time " << format_exact(ens.t) << '\n';
  for (const auto& [k, v] : snap.meta) b << "# meta " << k << ' ' << escape(v) << '\n';
  b << "# layout r,u,L,w:f64 id:u64 native-endian\n";
  b << "# data\n";
  for (const Particle& p : ens.particles) {
    b.write(reinterpret_cast<const char*>(&p.r), sizeof(double));
    b.write(reinterpret_cast<const char*>(&p.u), sizeof(double));
    b.write(reinterpret_cast<const char*>(&p.L), sizeof(double));
    b.write(reinterpret_cast<const char*>(&p.w), sizeof(double));
    b.write(reinterpret_cast<const char*>(&p.id), sizeof(std::uint64_t));
  }
  b << '\n';
  const std::string body = b.str();
  write_file(path, body + "# checksum " + hex64(fnv1a64(body)) + "\n");
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  const std::string all = read_file(path);
  check_version(all, kSnapshotMagic, "snapshot");
  const std::string body = verified_body(all, "snapshot");
  const auto data_tag = body.find("# data\n");
  if (data_tag == std::string::npos) throw FormatError("snapshot data block missing");
  std::istringstream hs(body.substr(0, data_tag));
  std::string line;
  std::getline(hs, line);
  Snapshot snap;
  std::size_t count = 0;
  bool have_count = false;
  while (std::getline(hs, line)) {
    std::istringstream ls(line.substr(2));
    std::string tag;
    ls >> tag;
    if (tag == "count") {
      ls >> count;
      have_count = true;
    } else if (tag == "time") {
      std::string v;
      ls >> v;
      snap.ensemble.t = parse_double(v);
    } else if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string rest;
      std::getline(ls, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      snap.meta[key] = unescape(rest);
    }
  }
  if (!have_count) throw FormatError("snapshot count missing");
  constexpr std::size_t rec = 4 * sizeof(double) + sizeof(std::uint64_t);
  const std::size_t offset = data_tag + 7;
  if (body.size() != offset + count * rec + 1) throw FormatError("snapshot data block has the wrong size");
  auto& ps = snap.ensemble.particles;
  ps.resize(count);
  const char* d = body.data() + offset;
  for (std::size_t i = 0; i < count; ++i, d += rec) {
    std::memcpy(&ps[i].r, d, sizeof(double));
    std::memcpy(&ps[i].u, d + 8, sizeof(double));
    std::memcpy(&ps[i].L, d + 16, sizeof(double));
    std::memcpy(&ps[i].w, d + 24, sizeof(double));
    std::memcpy(&ps[i].id, d + 32, sizeof(std::uint64_t));
  }
  return snap;
}

nlohmann::json to_json(const CasimirModel& m) {
  return {{"c1", m.c1}, {"c2", m.c2}, {"k1", m.k1}, {"k2", m.k2}, {"l", m.l}, {"gamma", m.gamma},
          {"f0_threshold", m.f0_threshold}, {"k3", m.k3()}};
}

nlohmann::json to_json(const FunctionalReport& r) {
  return {{"mass", r.mass},         {"kinetic", r.kinetic},   {"potential", r.potential}, {"casimir", r.casimir},
          {"angular", r.angular},   {"positive", r.positive}, {"D", r.total}};
}

namespace {

// JSON has no infinity; report it as a string.
nlohmann::json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

nlohmann::json state_summary(const AnsatzState& s) {
  return {{"model", to_json(s.model)},
          {"E0", s.E0},
          {"central_psi", s.central_psi},
          {"R_supp", number_or_inf(s.R_supp)},
          {"mass", s.mass},
          {"compact", s.compact},
          {"admissible", s.admissible},
          {"core_scale", s.core_scale},
          {"profile_nodes", s.r.size()},
          {"steps", s.steps},
          {"rejected_steps", s.rejected_steps},
          {"iterations", s.iterations},
          {"functionals", to_json(s.report)},
          {"note", s.note}};
}

nlohmann::json to_json(const ScalingReport& rep) {
  nlohmann::json witness = nlohmann::json::array();
  for (const auto& w : rep.witness.per_gamma) {
    witness.push_back({{"gamma", w.gamma}, {"found", w.found}, {"eta", w.eta}, {"a", w.a}, {"b", w.b},
                       {"c", w.c}, {"D", w.D}, {"a_bc_2l", w.a_bc_2l}, {"failure", w.failure}});
  }
  const auto& q = rep.inequality;
  return {{"alpha", rep.alpha},
          {"C_alpha", rep.C_alpha},
          {"R_M", rep.R_M},
          {"D_M", rep.D_M},
          {"D_M_source", rep.D_M_source},
          {"scaling_inequality",
           {{"D_M1", q.D1},
            {"D_M2", q.D2},
            {"margin", q.margin},
            {"exponent_identity_error", q.exponent_identity_error},
            {"a", q.params.a},
            {"b", q.params.b},
            {"c", q.params.c},
            {"interpretation", q.interpretation}}},
          {"negativity_witness", witness},
          {"largest_gamma_with_witness", rep.witness.largest_gamma},
          {"split",
           {{"D_M", rep.split.D_M},
            {"D_M_source", rep.split.D_M_source},
            {"R_M", rep.split.R_M},
            {"min_margin", rep.split.min_margin},
            {"checks", rep.split.checks}}},
          {"passed", rep.passed}};
}

nlohmann::json to_json(const StabilityResult& r) {
  return {{"t_dyn", r.t_dyn},
          {"dt", r.dt},
          {"steps", r.steps},
          {"initial_deviation", r.initial_deviation},
          {"max_deviation", r.max_deviation},
          {"deviation_ratio", number_or_inf(r.deviation_ratio)},
          {"energy_drift", r.energy_drift},
          {"max_L_drift", r.max_L_drift},
          {"max_mass_drift", r.max_mass_drift},
          {"reflections", r.reflections},
          {"note", r.note}};
}

void write_diagnostics_header(std::ostream& os) {
  os << "t,Ekin,Epot,Etot,d_surrogate,field_dist,lyapunov_sum,mass,L_drift_max\n";
}

void write_diagnostics_row(std::ostream& os, const DiagnosticSample& s) {
  os << format_exact(s.t) << ',' << format_exact(s.Ekin) << ',' << format_exact(s.Epot) << ','
     << format_exact(s.Etot) << ',' << format_exact(s.d_surrogate) << ',' << format_exact(s.field_dist) << ','
     << format_exact(s.lyapunov_sum) << ',' << format_exact(s.mass) << ',' << format_exact(s.L_drift_max) << '\n';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace cammvp
