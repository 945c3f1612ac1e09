#pragma once

#include <string>

#include <Eigen/Dense>

#include "sef/sef.hpp"

namespace sef {

struct PlotOptions {
  std::string title = "Prediction intervals";
  double width = 720.0;
  double height = 540.0;
};

/// SVG 1.1 scatter of (y_i, yhat_i) with the [lower, upper] band drawn over the
/// actual-value axis. Points whose target falls outside their interval are red.
std::string interval_scatter_svg(const Eigen::VectorXd& targets,
                                 const IntervalPrediction& prediction,
                                 const PlotOptions& options = {});

}  // namespace sef
