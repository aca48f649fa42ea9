#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "densift/io.hpp"
#include "densift/simulate.hpp"

using namespace densift;
using Catch::Approx;

namespace {

Manifest toy_manifest() {
  Manifest m;
  m.columns = {{"x", ColumnKind::continuous, ColumnRole::candidate},
               {"g", ColumnKind::discrete, ColumnRole::candidate},
               {"y", ColumnKind::continuous, ColumnRole::response}};
  return m;
}

Dataset ingest_text(const std::string& text, const Manifest& m, IngestReport* rep = nullptr) {
  std::istringstream in(text);
  return ingest_rows(parse_csv(in), m, rep);
}

}  // namespace

TEST_CASE("csv parsing handles quotes and crlf", "[io]") {
  std::istringstream in("a,b\r\n\"x,1\",\"he said \"\"hi\"\"\"\n2,3\n");
  auto rows = parse_csv(in);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1][0] == "x,1");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(rows[2][0] == "2");
}

TEST_CASE("discrete atoms are recoded deterministically", "[io]") {
  Dataset d = ingest_text("x,g,y\n1.0,b,0.5\n2.0,a,0.25\n3.0,b,0.75\n", toy_manifest());
  const Column& g = d.cols[d.find("g")];
  REQUIRE(g.n_atoms == 2);
  CHECK(g.atom_labels == std::vector<std::string>{"a", "b"});
  CHECK(g.codes == std::vector<int>{1, 0, 1});

  // numeric atoms sort numerically, not lexicographically
  Manifest m2 = toy_manifest();
  Dataset d2 = ingest_text("x,g,y\n1,10,0\n2,9,0\n3,10,0\n", m2);
  const Column& g2 = d2.cols[d2.find("g")];
  CHECK(g2.atom_labels == std::vector<std::string>{"9", "10"});
  CHECK(g2.codes == std::vector<int>{1, 0, 1});
}

TEST_CASE("manifest mismatches and parse errors", "[io]") {
  Manifest extra = toy_manifest();
  extra.columns.push_back({"missing", ColumnKind::continuous, ColumnRole::candidate});
  CHECK_THROWS_AS(ingest_text("x,g,y\n1,a,2\n", extra), ManifestMismatch);

  Manifest partial;
  partial.columns = {{"x", ColumnKind::continuous, ColumnRole::candidate}};
  CHECK_THROWS_AS(ingest_text("x,g\n1,a\n", partial), ManifestMismatch);

  CHECK_THROWS_AS(ingest_text("x,g,y\n1,a,not_a_number\n2,b,3\n", toy_manifest()),
                  ParseError);

  Manifest tiny = toy_manifest();
  tiny.max_atoms = 2;
  CHECK_THROWS_AS(ingest_text("x,g,y\n1,a,1\n2,b,2\n3,c,3\n", tiny), ManifestMismatch);
}

TEST_CASE("rows with missing used cells are dropped and counted", "[io]") {
  IngestReport rep;
  Dataset d = ingest_text("x,g,y\n1,a,2\n,b,3\n4,b,5\n", toy_manifest(), &rep);
  CHECK(d.n == 2);
  CHECK(rep.dropped_rows == 1);
  CHECK(rep.rows_read == 3);

  // missing cells in ignored columns do not drop the row
  Manifest m = toy_manifest();
  m.columns.push_back({"junk", ColumnKind::continuous, ColumnRole::ignore});
  IngestReport rep2;
  Dataset d2 = ingest_text("x,g,y,junk\n1,a,2,\n2,b,3,NA\n", m, &rep2);
  CHECK(d2.n == 2);
  CHECK(rep2.dropped_rows == 0);
}

TEST_CASE("ingest -> serialize -> ingest is idempotent", "[io]") {
  DesignSpec spec;
  spec.design = 1;
  spec.n = 40;
  spec.p = 6;
  spec.seed = 5;
  GenOutput g = gen_design(spec, 0);
  std::ostringstream csv;
  write_csv(g.data, csv);
  Manifest m;
  for (const Column& c : g.data.cols) m.columns.push_back({c.name, c.kind, c.role});
  Dataset round = ingest_text(csv.str(), m);
  std::ostringstream csv2;
  write_csv(round, csv2);
  CHECK(csv.str() == csv2.str());
  REQUIRE(round.n == g.data.n);
  for (std::size_t c = 0; c < g.data.cols.size(); ++c) {
    CHECK(round.cols[c].values == g.data.cols[c].values);
    CHECK(round.cols[c].codes == g.data.cols[c].codes);
  }
}

TEST_CASE("json dumper emits full-precision doubles and sorted keys", "[io]") {
  json j;
  j["b"] = 1.0 / 3.0;
  j["a"] = 2;
  j["c"] = {1.5, json(nullptr)};
  std::string s = dump_json(j, 0);
  CHECK(s.find("0.33333333333333331") != std::string::npos);
  CHECK(s.find("\"a\"") < s.find("\"b\""));
  // parses back to the same numeric value
  json back = json::parse(s);
  CHECK(back["b"].get<double>() == 1.0 / 3.0);
}

TEST_CASE("cli end to end: screen and determinism", "[cli]") {
  DesignSpec spec;
  spec.design = 1;
  spec.n = 60;
  spec.p = 6;
  spec.seed = 12;
  GenOutput g = gen_design(spec, 0);
  std::string dir = std::string(std::getenv("TMPDIR") ? std::getenv("TMPDIR") : "/tmp");
  std::string csv_path = dir + "/densift_test_data.csv";
  std::string man_path = dir + "/densift_test_manifest.json";
  {
    std::ofstream csv(csv_path);
    write_csv(g.data, csv);
    json man;
    man["columns"] = json::array();
    for (const Column& c : g.data.cols) {
      json e;
      e["name"] = c.name;
      e["kind"] = to_string(c.kind);
      e["role"] = to_string(c.role);
      man["columns"].push_back(e);
    }
    std::ofstream mf(man_path);
    mf << man.dump(2);
  }
  std::string out1 = dir + "/densift_out1.json";
  std::string out2 = dir + "/densift_out2.json";
  std::string cmd = std::string(DENSIFT_CLI_PATH) + " screen --csv " + csv_path +
                    " --manifest " + man_path + " --p-tilde 4 --out ";
  REQUIRE(std::system((cmd + out1).c_str()) == 0);
  REQUIRE(std::system((cmd + out2 + " --threads 2").c_str()) == 0);
  std::ifstream f1(out1), f2(out2);
  json j1 = json::parse(f1), j2 = json::parse(f2);
  CHECK(j1["result"] == j2["result"]);
  CHECK(j1["result"]["screening"]["retained"].size() == 3);

  // simulate subcommand carries the all_crr field
  std::string out3 = dir + "/densift_out3.json";
  std::string sim = std::string(DENSIFT_CLI_PATH) +
                    " simulate --design 1 --n 120 --p 6 --reps 3 --seed 7 --out " + out3;
  REQUIRE(std::system(sim.c_str()) == 0);
  std::ifstream f3(out3);
  json j3 = json::parse(f3);
  CHECK(j3["result"].contains("all_crr"));

  // usage error -> exit code 1; data error -> exit code 2
  int bad = std::system((std::string(DENSIFT_CLI_PATH) + " simulate --design 9 --n 50 "
                                                         "--p 6 --reps 1 --seed 1 > /dev/null 2>&1")
                            .c_str());
  CHECK(WEXITSTATUS(bad) == 1);
  int missing = std::system((std::string(DENSIFT_CLI_PATH) + " screen --csv /nonexistent.csv "
                                                             "--manifest " +
                             man_path + " > /dev/null 2>&1")
                                .c_str());
  CHECK(WEXITSTATUS(missing) == 2);
}
