// kfiltr: exact filtration calculus for polarized toric varieties given as
// lattice polytopes. Reads a JSON problem file, runs one subcommand (or the
// file's own task list via `run`) and emits an exact-rational report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "kfiltr/problem_io.hpp"

namespace {

int thread_cap() {
  // KFILTR_THREADS caps task fan-out; defaults to the hardware count.
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  int cap = static_cast<int>(std::min(hw, 8u));
  if (const char* env = std::getenv("KFILTR_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) cap = std::min(cap, v);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring malformed KFILTR_THREADS\n";
    }
  }
  return cap;
}

struct Options {
  std::string file;
  std::string filtration;
  std::string against;
  int k = 0, r = 0, m = 0, p = 0;
  std::string format = "table";
  std::string out;
};

int emit(const kfiltr::Report& report, const Options& opt) {
  const std::string text =
      opt.format == "csv" ? report.to_csv() : report.to_table();
  if (opt.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(opt.out, std::ios::binary);
    if (!os) {
      std::cerr << "cannot open output file: " << opt.out << "\n";
      return 1;
    }
    os << text;
  }
  return report.domain_failure ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact filtration calculus on lattice polytopes"};
  app.require_subcommand(1);

  const std::vector<std::string> commands = {
      "hilbert", "invariants", "df",     "df-rel",   "futaki",
      "chow",    "chow-rel",   "approx", "blowup",   "nu",
      "chow-inf", "cm-diff",   "check",  "run"};

  Options opt;
  std::string chosen;
  for (const std::string& name : commands) {
    CLI::App* sub = app.add_subcommand(
        name, name == "run" ? "execute the task list embedded in the file"
                            : "run the " + name + " computation");
    sub->add_option("file", opt.file, "problem file (JSON)")->required();
    sub->add_option("--filtration", opt.filtration, "filtration name");
    sub->add_option("--against", opt.against,
                    "second filtration name (cm-diff)");
    sub->add_option("--k", opt.k, "degree parameter");
    sub->add_option("--r", opt.r, "approximation / Chow level");
    sub->add_option("--m", opt.m, "blowup parameter");
    sub->add_option("--p", opt.p, "weight order");
    sub->add_option("--format", opt.format, "csv or table")
        ->check(CLI::IsMember({"csv", "table"}));
    sub->add_option("--out", opt.out, "write the report to a file");
    sub->callback([&chosen, name]() { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const kfiltr::ProblemFile pf = kfiltr::parse_problem_file(opt.file);
    std::vector<kfiltr::Task> tasks;
    if (chosen == "run") {
      tasks = pf.tasks;
    } else {
      kfiltr::Task t;
      t.command = chosen;
      if (!opt.filtration.empty()) t.args["filtration"] = opt.filtration;
      if (!opt.against.empty()) t.args["against"] = opt.against;
      if (opt.k > 0) t.args["k"] = std::to_string(opt.k);
      if (opt.r > 0) t.args["r"] = std::to_string(opt.r);
      if (opt.m > 0) t.args["m"] = std::to_string(opt.m);
      if (opt.p > 0) t.args["p"] = std::to_string(opt.p);
      tasks.push_back(std::move(t));
    }
    const kfiltr::Report report =
        kfiltr::run_tasks(pf, tasks, thread_cap());
    // Single-command domain errors surface on stderr with exit code 2.
    if (report.domain_failure && chosen != "run" && chosen != "check") {
      for (const kfiltr::ReportRow& r : report.rows)
        if (r.quantity == "error") {
          std::cerr << r.note << "\n";
          return 2;
        }
    }
    return emit(report, opt);
  } catch (const kfiltr::Error& e) {
    std::cerr << e.what() << "\n";
    return (e.code() == kfiltr::Errc::ParseError ||
            e.code() == kfiltr::Errc::ValidationError)
               ? 1
               : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
