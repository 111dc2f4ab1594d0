#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fracpb/errors.hpp"
#include "fracpb/problem_file.hpp"
#include "fracpb/solver.hpp"
#include "fracpb/text_output.hpp"
#include "oracles.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fracpb;
namespace fs = std::filesystem;

namespace {

const std::string nilpotent_text = R"(alpha: 0.5
t0: 0
horizon: 1
A:
  - power: 1
    matrix: [[0, 1], [0, 0]]
x0: [0, 1]
u:
  - exponent: 0
    value: [1, 0]
)";

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Run
{
    int status;
    std::string out;
    std::string err;
};

Run run_cli(const std::string& args, const std::string& env = "")
{
    const fs::path dir = fs::temp_directory_path();
    const fs::path out = dir / "fracpb_cli_test.out", err = dir / "fracpb_cli_test.err";
    const std::string cmd = env + " '" FRACPB_CLI "' " + args + " >'" + out.string() + "' 2>'" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

fs::path write_temp(const std::string& name, const std::string& text)
{
    const fs::path p = fs::temp_directory_path() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

int parse_error_line(const std::string& text)
{
    try {
        parse_problem(text);
    } catch (const parse_error& e) {
        return e.line();
    }
    return -1;
}

} // namespace

TEST_CASE("parsing the shipped problem")
{
    const auto f = load_problem(FRACPB_SOURCE_DIR "/problems/nilpotent_forced.yaml");
    const auto& p = f.problem;
    CHECK(p.alpha == 0.5);
    CHECK(p.t0 == 0.0);
    CHECK(p.horizon == 1.0);
    CHECK(p.dim() == 2);
    CHECK(p.x0 == Eigen::Vector2d(0, 1));
    const auto& a = std::get<MatrixPolynomial>(p.a);
    REQUIRE(a.coeffs().size() == 1);
    CHECK(a.coeffs()[0].power == 1);
    const auto& u = std::get<FracPowerSeries>(*p.u);
    REQUIRE(u.terms().size() == 1);
    CHECK(u.terms()[0].gamma == 1.0);
    CHECK(!f.grid);
    CHECK(!f.tol);
}

TEST_CASE("serialize and parse round trip")
{
    auto g = oracle::rng(41);
    ProblemFile f{IvpProblem{0.37, 0.25, 2.0,
                             MatrixPolynomial(0.25, 3, {{0, oracle::random_matrix(g, 3, 3, 1.0)}, {2, oracle::random_matrix(g, 3, 3, 1.0)}}),
                             oracle::random_matrix(g, 3, 1, 1.0),
                             FracPowerSeries(0.25, 3, 1, {{1.0, oracle::random_matrix(g, 3, 1, 1.0)}, {2.3, oracle::random_matrix(g, 3, 1, 1.0)}})},
                  256, 1e-10, 40};
    const auto text = serialize_problem(f);
    const auto back = parse_problem(text);
    CHECK(serialize_problem(back) == text);
    CHECK(back.problem.alpha == f.problem.alpha);
    CHECK(back.problem.x0 == f.problem.x0);
    CHECK(std::get<MatrixPolynomial>(back.problem.a).coeffs()[1].matrix == std::get<MatrixPolynomial>(f.problem.a).coeffs()[1].matrix);
    CHECK(std::get<FracPowerSeries>(*back.problem.u).terms()[1].gamma == doctest::Approx(2.3).epsilon(1e-15));
    CHECK(back.grid == 256);
    CHECK(back.tol == 1e-10);
    CHECK(back.max_terms == 40);
}

TEST_CASE("parse errors carry line numbers")
{
    CHECK(parse_error_line("alpha: 0.5\nhorizon: 1\nx0: [1]\nbogus: 3\n") == 4);
    CHECK(parse_error_line("alpha: 0.5\nhorizon: 1\nx0: [1, 2]\nA:\n  - power: 0\n    matrix: [[1]]\n") == 6);
    CHECK(parse_error_line("alpha: 0.5\nhorizon: 1\nA: []\nx0: [1]\nu:\n  - exponent: -0.5\n    value: [1]\n") == 6);
    CHECK(parse_error_line("alpha: [0.5\n") > 0);
    CHECK_THROWS_AS(parse_problem("horizon: 1\nx0: [1]\n"), parse_error);
    CHECK_THROWS_AS(parse_problem("alpha: 0.5\nhorizon: 1\nx0: [1]\ngrid: 2\n"), parse_error);
    CHECK_THROWS_AS(parse_problem("alpha: 0.5\nhorizon: 1\nx0: [1]\ntol: 0\n"), parse_error);
    CHECK_THROWS_AS(load_problem("/nonexistent/problem.yaml"), parse_error);
}

TEST_CASE("number formatting")
{
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(-0.0) == "0");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(0.25) == "0.25");
    CHECK(format_number(1.0 / 3.0) == "0.333333333");
    CHECK(format_number(-2.5e-7) == "-2.5e-07");
    CHECK(format_number(1234567.0) == "1.23456700e+06");
}

TEST_CASE("sample times end exactly at the horizon")
{
    const auto t = sample_times(0.1, 0.8, 7);
    REQUIRE(t.size() == 7);
    CHECK(t.front() == doctest::Approx(0.2));
    CHECK(t.back() == 0.8);
    CHECK_THROWS(sample_times(0.0, 1.0, 0));
}

TEST_CASE("trajectory CSV")
{
    const auto f = parse_problem(nilpotent_text);
    const auto sol = solve(f.problem);
    const auto csv = trajectory_csv(sol, 0.0, 1.0, 4);
    CHECK(csv == trajectory_csv(solve(f.problem), 0.0, 1.0, 4));
    CHECK(csv == slurp(FRACPB_SOURCE_DIR "/tests/golden/nilpotent_forced_4.csv"));

    // every row against the closed form
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x1,x2");
    int rows = 0;
    while (std::getline(in, line)) {
        double t, x1, x2;
        char c1, c2;
        std::istringstream(line) >> t >> c1 >> x1 >> c2 >> x2;
        CHECK(x1 == doctest::Approx(0.5 * t + std::sqrt(t) / oracle::gamma(1.5)).epsilon(1e-8));
        CHECK(x2 == doctest::Approx(1 / (std::sqrt(t) * oracle::gamma(0.5))).epsilon(1e-8));
        ++rows;
    }
    CHECK(rows == 4);

    const auto with_origin = trajectory_csv(sol, 0.0, 1.0, 2, true);
    CHECK(with_origin == "t,x1,x2,exponent\n0,0,0.564189584,-0.5\n0.5,1.04788456,0.797884561,0\n1,1.62837917,0.564189584,0\n");
}

TEST_CASE("closed-form text")
{
    const auto sol = solve(parse_problem(nilpotent_text).problem);
    CHECK(closed_form_text(sol.series()) == "x1(t) = 1.12837917 * t^0.5 + 0.5 * t^1\nx2(t) = 0.564189584 * t^-0.5\n");
    const FracPowerSeries shifted(2.0, 1, 1, {{1.5, Eigen::MatrixXd::Constant(1, 1, -3.0)}});
    CHECK(closed_form_text(shifted, "y") == "y1(t) = -3 * (t - 2)^0.5\n");
}

TEST_CASE("command line")
{
    const std::string problem = FRACPB_SOURCE_DIR "/problems/nilpotent_forced.yaml";
    SUBCASE("solve writes the golden CSV")
    {
        const auto r = run_cli("solve '" + problem + "' --samples 4");
        CHECK(r.status == 0);
        CHECK(r.out == slurp(FRACPB_SOURCE_DIR "/tests/golden/nilpotent_forced_4.csv"));
        CHECK(r.err.find("terminated_exactly=yes") != std::string::npos);
    }
    SUBCASE("phi")
    {
        const auto r = run_cli("phi '" + problem + "' --t 1");
        CHECK(r.status == 0);
        CHECK(r.out.find("[0.564189584, 0.5]\n[0, 0.564189584]\n") == 0);
        CHECK(r.out.find("terms_used: 2") != std::string::npos);
    }
    SUBCASE("ml")
    {
        const auto r = run_cli("ml 1 1 1");
        CHECK(r.status == 0);
        CHECK(std::stod(r.out) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    }
    SUBCASE("tolerance precedence: flag over file over environment")
    {
        const auto file = write_temp("fracpb_tol.yaml", "alpha: 0.5\nhorizon: 1\nA:\n  - power: 0\n    matrix: [[1]]\nx0: [1]\ntol: 1e-3\n");
        const auto terms = [](const std::string& err) { return std::stoi(err.substr(err.find("terms_used=") + 11)); };
        const int from_file = terms(run_cli("solve '" + file.string() + "' --samples 1", "FRAC_TOL=1e-14").err);
        const int from_flag = terms(run_cli("solve '" + file.string() + "' --samples 1 --tol 1e-14").err);
        CHECK(from_flag > from_file);
        const auto bare = write_temp("fracpb_notol.yaml", "alpha: 0.5\nhorizon: 1\nA:\n  - power: 0\n    matrix: [[1]]\nx0: [1]\n");
        CHECK(terms(run_cli("solve '" + bare.string() + "' --samples 1", "FRAC_TOL=1e-3").err) == from_file);
    }
    SUBCASE("input errors exit 1")
    {
        CHECK(run_cli("solve /nonexistent.yaml").status == 1);
        const auto bad = write_temp("fracpb_bad.yaml", "alpha: 0.5\nhorizon: 1\nx0: [1]\nbeta: 2\n");
        const auto r = run_cli("solve '" + bad.string() + "'");
        CHECK(r.status == 1);
        CHECK(r.err.find("line 4") != std::string::npos);
        CHECK(run_cli("frobnicate").status == 1);
        CHECK(run_cli("ml 3 1 1").status == 1);
    }
    SUBCASE("non-convergence exits 2 and prints the term norms")
    {
        const auto big = write_temp("fracpb_big.yaml", "alpha: 0.5\nhorizon: 1\nA:\n  - power: 0\n    matrix: [[9]]\nx0: [1]\nmax_terms: 4\n");
        const auto r = run_cli("solve '" + big.string() + "'");
        CHECK(r.status == 2);
        CHECK(r.err.find("term norms:") != std::string::npos);
    }
    SUBCASE("validation with a corrupted reference Gamma exits 3")
    {
        const auto r = run_cli("validate --corrupt-gamma");
        CHECK(r.status == 3);
        CHECK(r.out.find("FAIL") != std::string::npos);
    }
}
