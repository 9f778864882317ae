// Acceptance runner: one PASS/FAIL line per criterion. `--only N` runs one.
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "treecast/verification.hpp"

namespace {

struct Criterion {
  int id;
  const char* title;
  std::function<treecast::verify::SuiteResult()> run;
};

std::vector<Criterion> criteria() {
  namespace v = treecast::verify;
  return {
      {1, "fraction identification matches the closed form", [] { return v::fraction_identity(); }},
      {2, "majority equals fraction identification for k = 1", [] { return v::equality_case(); }},
      {3, "majority beats fraction identification for k >= 2", [] { return v::strict_inequality(); }},
      {4, "p_c(k) r decreases and approaches its limit", [] { return v::critical_trend(); }},
      {5, "FK root cluster grows like (pr)^k", [] { return v::growth_rate(); }},
      {6, "sum of squared cluster sizes stays above r^k", [] { return v::second_moment_floor(); }},
      {7, "third cluster moment is o((pr^2)^k)", [] { return v::third_moment_decay(); }},
      {8, "anti-concentration of +-1 cluster sums", [] { return v::anti_concentration(); }},
      {9, "conditional sign advantages are positive", [] { return v::conditionals(); }},
      {10, "ML advantage is monotone under subtrees", [] { return v::subtree_monotonicity(); }},
      {11, "block majority with M >= M* restores reconstruction", [] { return v::block_correction(); }},
      {12, "minority removal bracket contains the exact bounds", [] { return v::minority_removal(); }},
      {13, "simulator agrees with the exact engine", [] { return v::crossval(); }},
  };
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::cerr << "usage: acceptance [--only N]\n";
      return 2;
    }
  }
  bool all_ok = true;
  bool ran = false;
  for (const auto& c : criteria()) {
    if (only != 0 && c.id != only) continue;
    ran = true;
    treecast::verify::SuiteResult res;
    try {
      res = c.run();
    } catch (const std::exception& e) {
      std::cout << "  error: " << e.what() << '\n';
    }
    for (const auto& chk : res.checks) {
      std::cout << "  [" << (chk.passed ? "ok" : "xx") << "] " << chk.name << ": measured "
                << treecast::verify::detail::fmt(chk.measured) << ", required " << chk.required;
      if (!chk.detail.empty()) std::cout << " (" << chk.detail << ")";
      std::cout << '\n';
    }
    const bool ok = res.passed();
    all_ok = all_ok && ok;
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.title << " ["
              << treecast::verify::detail::fmt(res.seconds, 3) << " s]\n";
  }
  if (!ran) {
    std::cerr << "no criterion " << only << '\n';
    return 2;
  }
  return all_ok ? 0 : 1;
}
