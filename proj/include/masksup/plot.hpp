/* Copyright 2026 The MaskSup Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Static PNG charts (line plots and grouped bar charts) drawn with OpenCV.

#ifndef MASKSUP_PLOT_HPP_
#define MASKSUP_PLOT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "masksup/common.hpp"

namespace masksup::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
};

namespace plot_internal {

constexpr int kWidth = 800;
constexpr int kHeight = 500;
constexpr int kLeft = 80, kRight = 170, kTop = 50, kBottom = 60;

inline cv::Scalar Color(std::size_t i) {
  static const cv::Scalar palette[] = {
      {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214},
      {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};
  return palette[i % 8];
}

inline std::string Fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

inline void Text(cv::Mat& img, const std::string& s, cv::Point p,
                 double scale = 0.45) {
  cv::putText(img, s, p, cv::FONT_HERSHEY_SIMPLEX, scale, {0, 0, 0}, 1,
              cv::LINE_AA);
}

inline void Frame(cv::Mat& img, const Axes& axes, double y_lo, double y_hi) {
  const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  cv::rectangle(img, {x0, y1}, {x1, y0}, {0, 0, 0}, 1);
  for (int t = 0; t <= 4; ++t) {
    const double v = y_lo + (y_hi - y_lo) * t / 4.0;
    const int py = y0 - static_cast<int>((y0 - y1) * t / 4.0);
    cv::line(img, {x0 - 4, py}, {x0, py}, {0, 0, 0}, 1);
    cv::line(img, {x0 + 1, py}, {x1 - 1, py}, {225, 225, 225}, 1);
    Text(img, Fmt(v), {8, py + 4}, 0.4);
  }
  Text(img, axes.title, {x0, 30}, 0.6);
  Text(img, axes.x_label, {(x0 + x1) / 2 - 40, kHeight - 15});
  Text(img, axes.y_label, {8, kTop - 12}, 0.4);
}

inline void Save(const cv::Mat& img, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), img)) {
    throw Error("cannot write plot '" + path.string() + "'");
  }
}

}  // namespace plot_internal

inline void LinePlot(const std::filesystem::path& path,
                     const std::vector<Series>& series, const Axes& axes) {
  using namespace plot_internal;
  double xl = std::numeric_limits<double>::infinity(), xh = -xl, yl = xl, yh = -xl;
  for (const auto& s : series) {
    for (double v : s.x) xl = std::min(xl, v), xh = std::max(xh, v);
    for (double v : s.y) {
      if (std::isfinite(v)) yl = std::min(yl, v), yh = std::max(yh, v);
    }
  }
  if (!std::isfinite(xl)) xl = 0, xh = 1, yl = 0, yh = 1;
  if (xh <= xl) xh = xl + 1;
  if (yh <= yl) yh = yl + 1;
  const double pad = 0.05 * (yh - yl);
  yl -= pad;
  yh += pad;
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  Frame(img, axes, yl, yh);
  const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  auto px = [&](double x, double y) {
    return cv::Point(x0 + static_cast<int>((x - xl) / (xh - xl) * (x1 - x0)),
                     y0 - static_cast<int>((y - yl) / (yh - yl) * (y0 - y1)));
  };
  Text(img, Fmt(xl), {x0 - 5, y0 + 18}, 0.4);
  Text(img, Fmt(xh), {x1 - 20, y0 + 18}, 0.4);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    for (std::size_t j = 0; j + 1 < s.x.size() && j + 1 < s.y.size(); ++j) {
      cv::line(img, px(s.x[j], s.y[j]), px(s.x[j + 1], s.y[j + 1]), Color(i), 2,
               cv::LINE_AA);
    }
    if (s.x.size() < 40) {
      for (std::size_t j = 0; j < s.x.size() && j < s.y.size(); ++j) {
        cv::circle(img, px(s.x[j], s.y[j]), 3, Color(i), cv::FILLED, cv::LINE_AA);
      }
    }
    const int ly = kTop + 20 + 22 * static_cast<int>(i);
    cv::line(img, {x1 + 12, ly - 4}, {x1 + 32, ly - 4}, Color(i), 3);
    Text(img, s.label, {x1 + 38, ly});
  }
  Save(img, path);
}

// values[g][s] is the bar of series s within group g.
inline void GroupedBarChart(const std::filesystem::path& path,
                            const std::vector<std::string>& groups,
                            const std::vector<std::string>& series,
                            const std::vector<std::vector<double>>& values,
                            const Axes& axes) {
  using namespace plot_internal;
  double yh = 0.0;
  for (const auto& row : values)
    for (double v : row) yh = std::max(yh, v);
  if (yh <= 0.0) yh = 1.0;
  yh *= 1.1;
  cv::Mat img(kHeight, kWidth, CV_8UC3, cv::Scalar(255, 255, 255));
  Frame(img, axes, 0.0, yh);
  const int x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double group_w = static_cast<double>(x1 - x0) / std::max<std::size_t>(1, groups.size());
  const double bar_w = 0.8 * group_w / std::max<std::size_t>(1, series.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = x0 + g * group_w + 0.1 * group_w;
    for (std::size_t s = 0; s < series.size() && s < values[g].size(); ++s) {
      const double v = values[g][s];
      const int top = y0 - static_cast<int>(v / yh * (y0 - y1));
      const int bx = static_cast<int>(gx + s * bar_w);
      cv::rectangle(img, {bx, top}, {static_cast<int>(bx + bar_w - 2), y0},
                    Color(s), cv::FILLED);
      Text(img, Fmt(v), {bx, top - 4}, 0.35);
    }
    Text(img, groups[g], {static_cast<int>(gx), y0 + 18}, 0.45);
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const int ly = kTop + 20 + 22 * static_cast<int>(s);
    cv::rectangle(img, {x1 + 12, ly - 12}, {x1 + 28, ly}, Color(s), cv::FILLED);
    Text(img, series[s], {x1 + 36, ly});
  }
  Save(img, path);
}

}  // namespace masksup::plot

#endif  // MASKSUP_PLOT_HPP_
