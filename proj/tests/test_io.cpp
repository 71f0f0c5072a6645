#include "doctest.h"

#include <filesystem>
#include <sstream>

#include "cammvp/io.hpp"
#include "oracles.hpp"

using namespace cammvp;

namespace {

const AnsatzState& state() {
  static const AnsatzState s = match_mass(CasimirModel::polytrope(1.0, 0.5, 0.01), 1.0);
  return s;
}

std::string stored(const AnsatzState& s) {
  std::ostringstream os;
  store_state(os, s);
  return os.str();
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("profile round trip is bit-exact") {
    const AnsatzState& s = state();
    std::istringstream is(stored(s));
    const AnsatzState t = load_state(is);
    CHECK(t.r == s.r);
    CHECK(t.U == s.U);
    CHECK(t.rho == s.rho);
    CHECK(t.m == s.m);
    CHECK(t.E0 == s.E0);
    CHECK(t.central_psi == s.central_psi);
    CHECK(t.R_supp == s.R_supp);
    CHECK(t.mass == s.mass);
    CHECK(t.compact == s.compact);
    CHECK(t.model.k1 == s.model.k1);
    CHECK(t.model.l == s.model.l);
    CHECK(t.model.gamma == s.model.gamma);
    CHECK(stored(t) == stored(s));
  }

  TEST_CASE("profile file round trip") {
    const auto dir = oracle::temp_dir("io");
    store_state(dir / "p.txt", state());
    CHECK(load_state(dir / "p.txt").U == state().U);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("truncated or edited profiles are rejected") {
    const std::string text = stored(state());
    std::istringstream cut(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_state(cut), FormatError);

    std::string edited = text;
    const auto row = edited.find("\n0 ");
    REQUIRE(row != std::string::npos);
    edited[row + 1] = '1';
    std::istringstream ed(edited);
    CHECK_THROWS_AS(load_state(ed), FormatError);
  }

  TEST_CASE("other versions and foreign files are rejected") {
    std::string text = stored(state());
    const auto v = text.find("v1");
    REQUIRE(v != std::string::npos);
    text.replace(v, 2, "v2");
    std::istringstream is(text);
    CHECK_THROWS_WITH_AS(load_state(is), doctest::Contains("not supported"), FormatError);
    std::istringstream junk("hello\n");
    CHECK_THROWS_AS(load_state(junk), FormatError);
  }

  TEST_CASE("grid round trip is bit-exact") {
    Rng rng(3);
    const GridDensity layout = GridDensity::zeros(1.3, 2.1, 24, 16, 12);
    const GridDensity f = random_density(layout, rng, 0.7);
    std::ostringstream os;
    store_grid(os, f);
    std::istringstream is(os.str());
    const GridDensity g = load_grid(is);
    CHECK(g.same_layout(f));
    CHECK(g.values() == f.values());
    CHECK(g.r_grid().r() == f.r_grid().r());
    CHECK(g.u_axis().nodes() == f.u_axis().nodes());
    CHECK(g.w_axis().nodes() == f.w_axis().nodes());

    const std::string text = os.str();
    std::istringstream cut(text.substr(0, text.size() - 40));
    CHECK_THROWS_AS(load_grid(cut), FormatError);
  }

  TEST_CASE("snapshot round trip is bit-exact") {
    Snapshot snap;
    snap.ensemble = sample_from(state(), 777, 12);
    snap.ensemble.t = 0.125;
    for (std::size_t i = 0; i < snap.ensemble.size(); ++i) snap.ensemble.accel.push_back(-1.0 / (i + 3.0));
    snap.meta["seed"] = "12";
    snap.meta["note"] = "unit";
    const auto dir = oracle::temp_dir("snap");
    store_snapshot(dir / "s.snap", snap);
    const Snapshot back = load_snapshot(dir / "s.snap");
    CHECK(back.ensemble.t == snap.ensemble.t);
    REQUIRE(back.ensemble.size() == snap.ensemble.size());
    bool same = true;
    for (std::size_t i = 0; i < snap.ensemble.size(); ++i) {
      const Particle &a = snap.ensemble.particles[i], &b = back.ensemble.particles[i];
      same = same && a.r == b.r && a.u == b.u && a.L == b.L && a.w == b.w && a.id == b.id;
    }
    CHECK(same);
    CHECK(back.meta.at("seed") == "12");
    CHECK(back.meta.at("note") == "unit");

    std::string text = read_file(dir / "s.snap");
    write_file(dir / "cut.snap", text.substr(0, text.size() - 100));
    CHECK_THROWS_AS(load_snapshot(dir / "cut.snap"), FormatError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("diagnostics CSV has the documented columns") {
    std::ostringstream os;
    write_diagnostics_header(os);
    CHECK(os.str() == "t,Ekin,Epot,Etot,d_surrogate,field_dist,lyapunov_sum,mass,L_drift_max\n");
    DiagnosticSample s;
    s.t = 0.5;
    s.mass = 1.0;
    write_diagnostics_row(os, s);
    CHECK(os.str().find("\n0.5,") != std::string::npos);
  }

  TEST_CASE("state summary carries the key fields") {
    const auto j = state_summary(state());
    CHECK(j.at("E0").get<double>() == state().E0);
    CHECK(j.at("mass").get<double>() == state().mass);
    CHECK(j.contains("model"));
  }
}
