#include "catch_amalgamated.hpp"

#include <json.hpp>

#include "rslab/cli.hpp"

using namespace rslab;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "rslab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch() {
    auto dir = fs::temp_directory_path() / "rslab_test_cli";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::string write_file(const std::string& name, const std::string& body) {
    auto p = scratch() / name;
    std::ofstream(p, std::ios::binary) << body;
    return p.string();
}

}  // namespace

TEST_CASE("exit codes") {
    auto out = (scratch() / "x.csv").string();
    CHECK(invoke({"psd", "--gl1", "--frobnicate"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
    CHECK(invoke({"psd", "--gl1", "--synthetic", "--output", out}).code == 2);
    CHECK(invoke({"psd", "--output", out}).code == 2);
    CHECK(invoke({"psd", "--gl1", "--kind", "nonsense", "--output", out}).code == 2);
    CHECK(invoke({"count", "--field", "quadratic:4", "--output", out}).code == 2);
    CHECK(invoke({"density", "--synthetic", "--p", "7", "--output", out}).code == 2);
    CHECK(invoke({"detect", "--tau", "5", "--output", out}).code == 2);
    CHECK(invoke({"detect", "--lower", "--output", out}).code == 2);
    CHECK(invoke({"ingest", "--zeros", (scratch() / "missing.txt").string(), "--output", out}).code == 4);
    auto r = invoke({"constants", "--output", "/nonexistent-dir/constants.csv"});
    CHECK(r.code == 4);
    CHECK(r.err.find("cannot write") != std::string::npos);
}

TEST_CASE("corrupted family spec reports the line") {
    auto out = (scratch() / "x.csv").string();
    auto bad = write_file("bad.spec", "[family]\nkind = dirichlet\n\nqmax = ten\n");
    auto r = invoke({"psd", "--family", bad, "--output", out});
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.spec:4") != std::string::npos);

    auto unknown = write_file("unknown.spec", "[family]\nkind = synthetic\ndegree = 2\ncount = 3\ncolour = red\n");
    r = invoke({"psd", "--family", unknown, "--output", out});
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown.spec:5") != std::string::npos);

    auto noeq = write_file("noeq.spec", "[family]\nkind dirichlet\n");
    r = invoke({"psd", "--family", noeq, "--output", out});
    CHECK(r.code == 2);
    CHECK(r.err.find("noeq.spec:2") != std::string::npos);

    auto hecke = write_file("hecke_bad.csv", "p,a_p\n2,-24\n3,oops\n");
    auto spec = write_file("hecke.spec", "[family]\nkind = hecke\nfile = hecke_bad.csv\nweight = 12\nlevel = 1\n");
    r = invoke({"psd", "--family", spec, "--output", out});
    CHECK(r.code == 2);
    CHECK(r.err.find("hecke_bad.csv") != std::string::npos);

    CHECK(invoke({"psd", "--family", (scratch() / "absent.spec").string(), "--output", out}).code == 4);
}

TEST_CASE("family spec files match the equivalent flags") {
    auto a = (scratch() / "a.csv").string(), b = (scratch() / "b.csv").string();
    auto spec = write_file("syn.spec", "# planted\n[family]\nkind = synthetic\ndegree = 2\ncount = 4\nseed = 9\n"
                                       "model = planted\nplanted_p = 3\nplanted_theta = 0.25\n");
    REQUIRE(invoke({"psd", "--family", spec, "--nmax", "60", "--output", a}).code == 0);
    REQUIRE(invoke({"psd", "--synthetic", "--count", "4", "--seed", "9", "--planted-p", "3", "--planted-theta", "0.25",
                    "--nmax", "60", "--output", b})
                .code == 0);
    auto body = [](const std::string& s) { return s.substr(s.find('\n')); };
    CHECK(body(slurp(a)) == body(slurp(b)));

    auto pi0 = write_file("pi0.spec", "[family]\nkind = dirichlet\nqmax = 5\n[pi0]\nrep = char:5:1\n");
    REQUIRE(invoke({"covers", "--family", pi0, "--nmax", "30", "--trials", "5", "--output", a}).code == 0);
    REQUIRE(invoke({"covers", "--gl1", "--qmax", "5", "--pi0", "char:5:1", "--nmax", "30", "--trials", "5", "--output", b}).code == 0);
    CHECK(body(slurp(a)) == body(slurp(b)));
}

TEST_CASE("repeat runs are byte identical and independent of threads") {
    auto a = (scratch() / "r1.csv").string(), b = (scratch() / "r2.csv").string();
    std::vector<std::string> args{"large-sieve", "--gl1", "--qmax", "6", "--n", "40,80"};
    auto with = [&](std::string path, std::string threads) {
        auto v = args;
        v.insert(v.begin(), {"--threads", threads});
        v.insert(v.end(), {"--output", path});
        return invoke(v);
    };
    REQUIRE(with(a, "1").code == 0);
    REQUIRE(with(b, "4").code == 0);
    CHECK(slurp(a) == slurp(b));
    REQUIRE(with(b, "1").code == 0);
    CHECK(slurp(a) == slurp(b));
    set_threads(0);
}

TEST_CASE("jsonl round trip keeps every digit") {
    auto path = (scratch() / "c.jsonl").string();
    REQUIRE(invoke({"--format", "jsonl", "constants", "--output", path}).code == 0);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    auto head = nlohmann::json::parse(line);
    CHECK(head["config"]["command"] == "constants");
    CHECK(head["config"]["format"] == "jsonl");
    CHECK_FALSE(head["config"].contains("output"));
    auto c = solve_constants();
    std::map<std::string, double> seen;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        seen[j["quantity"]] = j["value"].get<double>();
    }
    CHECK(seen.at("alpha") == c.alpha);
    CHECK(seen.at("A1") == c.A1);
    CHECK(seen.at("V") == c.V);
    CHECK(seen.at("A0") == c.A0);
}

TEST_CASE("csv carries the config line, header and typed cells") {
    auto path = (scratch() / "c.csv").string();
    REQUIRE(invoke({"constants", "--output", path}).code == 0);
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("# config=", 0) == 0);
    auto cfg = nlohmann::json::parse(line.substr(9));
    CHECK(cfg["command"] == "constants");
    std::getline(in, line);
    CHECK(line == "quantity,value,reference,abs_diff");
    std::getline(in, line);
    CHECK(line.rfind("alpha,7.2575705916629", 0) == 0);
}

TEST_CASE("empty results still write a header") {
    Report r;
    r.columns = {"a", "b"};
    r.config = {{"command", "x"}};
    CHECK(r.str(Format::csv) == "# config={\"command\":\"x\"}\na,b\n");
    CHECK(r.str(Format::jsonl) == "{\"config\":{\"command\":\"x\"}}\n");
    CHECK_THROWS_AS(r.add({1.0}), InvariantError);

    auto path = (scratch() / "empty.csv").string();
    REQUIRE(invoke({"psd", "--gl1", "--qmax", "3", "--nmax", "1", "--unramified", "--output", path}).code == 0);
    std::istringstream in(slurp(path));
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines <= 3);
}

TEST_CASE("report cells escape and encode non-finite values") {
    CHECK(cell_csv(std::string("a,b")) == "\"a,b\"");
    CHECK(cell_csv(std::string("q\"q")) == "\"q\"\"q\"");
    CHECK(cell_json(std::string("a\"\n")) == "\"a\\\"\\n\"");
    CHECK(cell_json(std::numeric_limits<double>::quiet_NaN()) == "null");
    CHECK(cell_csv(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(cell_json(Cell{}) == "null");
    CHECK(cell_csv(0.1) == "0.10000000000000001");
}

TEST_CASE("config echo includes defaults and the family") {
    auto path = (scratch() / "ls.jsonl").string();
    REQUIRE(invoke({"--format", "jsonl", "--threads", "2", "large-sieve", "--gl1", "--qmax", "4", "--n", "30", "--output", path})
                .code == 0);
    set_threads(0);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    auto cfg = nlohmann::json::parse(line)["config"];
    CHECK(cfg["command"] == "large-sieve");
    CHECK(cfg["qmax"] == "4");
    CHECK(cfg["gl1"] == "true");
    CHECK(cfg["synthetic"] == "false");
    CHECK(cfg["kind"] == "lambda");
    CHECK(cfg["n"] == "30");
    CHECK(cfg["family_description"] == "gl1-modulus<=4");
    CHECK_FALSE(cfg.contains("threads"));
    CHECK_FALSE(cfg.contains("output"));
}

TEST_CASE("large sieve report for primitive characters") {
    auto path = (scratch() / "ls.csv").string();
    auto r = invoke({"large-sieve", "--gl1", "--qmax", "10", "--n", "200", "--output", path});
    REQUIRE(r.code == 0);
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    CHECK(line.rfind("N,members,Q,measured,power_iteration,classical_bound", 0) == 0);
    std::getline(in, line);
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() >= 6);
    double measured = std::stod(cells[3]);
    CHECK(measured <= 299);
    CHECK(measured >= 200);
    CHECK(std::stod(cells[5]) == 299);
}

TEST_CASE("every command has a passing selftest") {
    for (const auto& c : cli::commands()) {
        INFO(c);
        auto r = invoke({"--selftest", c});
        CHECK(r.code == 0);
        CHECK(r.out.find("PASS") != std::string::npos);
        CHECK(r.out.find("FAIL") == std::string::npos);
    }
}

TEST_CASE("constants command") {
    auto path = (scratch() / "k.csv").string();
    auto r = invoke({"constants", "--output", path});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("alpha=7.25757059") != std::string::npos);
    CHECK(slurp(path).find("\nA1,11.40163851808") != std::string::npos);
}

TEST_CASE("commands run end to end") {
    auto path = (scratch() / "e.csv").string();
    auto zeros = std::string(RSLAB_DATA_DIR) + "/zeta_zeros_200.txt";
    auto hecke = std::string(RSLAB_DATA_DIR) + "/delta_ap_2000.csv";
    std::vector<std::vector<std::string>> runs{
        {"psd", "--synthetic", "--degree", "3", "--kind", "remark2", "--unramified", "--nmax", "120"},
        {"covers", "--gl1", "--qmax", "5", "--target", "log", "--nmax", "60", "--trials", "20"},
        {"sieve-weights", "--rep", "char:7:2", "--z", "40"},
        {"sifted", "--gl1", "--qmax", "5", "--x", "300", "--z", "5"},
        {"residue", "--rep", "char:5:1", "--x", "1e4"},
        {"mvt", "--gl1", "--qmax", "4", "--X", "40"},
        {"detect", "--zeros", zeros, "--lower", "--samples", "20"},
        {"density", "--synthetic", "--planted-p", "2", "--planted-theta", "0.3"},
        {"count", "--n", "1", "--Q", "12", "--epsilon", "0.1"},
        {"ingest", "--hecke", hecke, "--nmax", "100"},
        {"ingest", "--zeros", zeros},
    };
    for (auto args : runs) {
        INFO(args[0]);
        args.insert(args.end(), {"--output", path});
        auto r = invoke(args);
        CHECK(r.code == 0);
        CHECK(r.err.empty());
        CHECK(fs::file_size(path) > 0);
    }
}

TEST_CASE("representation selectors") {
    auto fam = dirichlet_modulus_family(5);
    CHECK(cli::select_rep("trivial", nullptr, NumberFieldSpec::rationals()).label() == trivial_representation().label());
    CHECK(cli::select_rep("member:2", &fam, fam.field).label() == fam.members[2].label());
    CHECK_THROWS_AS(cli::select_rep("member:99", &fam, fam.field), UsageError);
    CHECK_THROWS_AS(cli::select_rep("char:5:9", nullptr, fam.field), UsageError);
    CHECK_THROWS_AS(cli::select_rep("char:-5:1", nullptr, fam.field), UsageError);
    CHECK_THROWS_AS(cli::select_rep("chi", nullptr, fam.field), UsageError);
    CHECK(cli::parse_field("quadratic:-3").discriminant() == -3);
    CHECK_THROWS_AS(cli::parse_field("cubic:5"), UsageError);
}
