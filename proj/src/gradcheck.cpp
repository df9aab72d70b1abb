#include "vvnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "vvnet/random.hpp"

namespace vvnet {

const ElementCheck* CheckReport::worst() const {
  if (elements.empty()) return nullptr;
  return &*std::max_element(elements.begin(), elements.end(),
                            [](const auto& a, const auto& b) { return a.rel_error < b.rel_error; });
}

std::string CheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << " checked=" << elements.size()
     << " max_rel_err=" << max_rel_error;
  if (const auto* w = worst()) {
    os << " (input " << w->input << " [" << w->index << "] analytic=" << w->analytic
       << " numeric=" << w->numeric << ")";
  }
  return os.str();
}

CheckReport grad_check(const std::function<Tensor()>& f, std::span<Tensor> inputs,
                       const GradCheckOptions& opt) {
  for (auto& x : inputs) {
    if (!x.requires_grad()) x.set_requires_grad(true);
    x.zero_grad();
  }
  Tensor loss = f();
  backward(loss);

  CheckReport report;
  Rng rng(opt.seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor& x = inputs[i];
    std::vector<std::int64_t> picks(static_cast<std::size_t>(x.numel()));
    std::iota(picks.begin(), picks.end(), 0);
    if (opt.max_elements_per_input > 0 && picks.size() > opt.max_elements_per_input) {
      // Partial Fisher-Yates keeps the sample deterministic per seed.
      for (std::size_t k = 0; k < opt.max_elements_per_input; ++k) {
        auto j = k + rng.next() % (picks.size() - k);
        std::swap(picks[k], picks[j]);
      }
      picks.resize(opt.max_elements_per_input);
      std::sort(picks.begin(), picks.end());
    }
    std::vector<double> analytic(x.grad().begin(), x.grad().end());
    for (auto idx : picks) {
      double saved = x.data()[idx];
      double fp, fm;
      {
        NoGradGuard guard;
        x.data()[idx] = saved + opt.eps;
        fp = f().item();
        x.data()[idx] = saved - opt.eps;
        fm = f().item();
      }
      x.data()[idx] = saved;
      ElementCheck e;
      e.input = i;
      e.index = idx;
      e.analytic = analytic[idx];
      e.numeric = (fp - fm) / (2.0 * opt.eps);
      double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), opt.magnitude_floor});
      e.rel_error = std::abs(e.analytic - e.numeric) / denom;
      if (!std::isfinite(e.rel_error)) e.rel_error = std::numeric_limits<double>::infinity();
      report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
      report.elements.push_back(e);
    }
  }
  report.passed = report.max_rel_error < opt.tol;
  return report;
}

CheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                       double eps, double tol) {
  GradCheckOptions opt;
  opt.eps = eps;
  opt.tol = tol;
  std::vector<Tensor> inputs{x};
  return grad_check([&] { return f(inputs[0]); }, inputs, opt);
}

}  // namespace vvnet
