// Draw one synthetic regression problem and print the RidgeTrim + lasso prediction set.
#include "tcp/data.hpp"
#include "tcp/tcp.hpp"

#include <iostream>

int main() {
  tcp::SyntheticSpec spec;
  spec.n = 60;
  spec.p = 100;
  spec.k = 4;
  spec.seed = 7;
  const tcp::SyntheticDraw draw = tcp::gen_synthetic(spec);

  tcp::TcpConfig cfg;
  cfg.trim_method = tcp::TrimMethod::RidgeTrim;
  cfg.alpha_trim = 1.0 / static_cast<double>(spec.n + 1);
  cfg.alpha_predict = 0.1;
  cfg.lambda = tcp::default_lambda(spec.n, spec.p, spec.noise);

  const tcp::TcpResult r = tcp::tcp_predict(cfg, draw.data, draw.x_new);
  std::cout << "trim set    [" << r.trim_set.interval.lo << ", " << r.trim_set.interval.hi << "]\n";
  for (const auto& iv : r.prediction_set.intervals) std::cout << "prediction  [" << iv.lo << ", " << iv.hi << "]\n";
  std::cout << "true y      " << draw.y_new << '\n'
            << "lasso fits  " << r.n_slow_fits << " for " << r.prediction_set.grid.points().size() << " grid points\n"
            << "guarantee   " << tcp::coverage_bound(cfg) << '\n';
}
