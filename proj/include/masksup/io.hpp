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

// Image files and image/mask directory datasets.
//
// Directory layout:
//   root/images/<stem>.png|.jpg|.jpeg   RGB or grayscale image
//   root/masks/<stem>.png                8-bit, pixel value = class index
//   root/splits/{train,val,test}.txt     optional, one stem per line
// Without split files the stems are ordered by their 64-bit FNV-1a hash (ties
// by name) and split train = floor(0.7 n), val = floor(0.15 n), test = rest.

#ifndef MASKSUP_IO_HPP_
#define MASKSUP_IO_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "masksup/common.hpp"
#include "masksup/data.hpp"
#include "masksup/tensor.hpp"

namespace masksup::io {

namespace fs = std::filesystem;

// Decodes to a 3-channel [0, 1] image (grayscale is replicated).
inline ImageTensor ReadImage(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw InvalidArgument("cannot decode image '" + path.string() + "'");
  ImageTensor img(3, m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      // OpenCV stores BGR.
      for (int c = 0; c < 3; ++c) img.At(c, y, x) = row[x][2 - c] / 255.0f;
    }
  }
  return img;
}

inline void WriteImage(const fs::path& path, const ImageTensor& img) {
  cv::Mat m;
  if (img.channels() == 1) {
    m = cv::Mat(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        m.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(
            std::lround(std::clamp(img.At(0, y, x), 0.0f, 1.0f) * 255.0f));
  } else if (img.channels() == 3) {
    m = cv::Mat(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        for (int c = 0; c < 3; ++c)
          m.at<cv::Vec3b>(y, x)[2 - c] = cv::saturate_cast<std::uint8_t>(
              std::lround(std::clamp(img.At(c, y, x), 0.0f, 1.0f) * 255.0f));
  } else {
    throw InvalidArgument("can only write 1- or 3-channel images");
  }
  if (!cv::imwrite(path.string(), m)) {
    throw Error("cannot write image '" + path.string() + "'");
  }
}

// Label maps are stored as 8-bit single-channel images of class indices.
inline LabelMap ReadLabelMap(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw InvalidArgument("cannot decode mask '" + path.string() + "'");
  if (m.channels() != 1 || m.depth() != CV_8U) {
    throw InvalidArgument("mask '" + path.string() +
                          "' must be single-channel 8-bit");
  }
  LabelMap out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) out.At(y, x) = m.at<std::uint8_t>(y, x);
  return out;
}

inline void WriteLabelMap(const fs::path& path, const LabelMap& label) {
  cv::Mat m(label.height(), label.width(), CV_8UC1);
  for (int y = 0; y < label.height(); ++y) {
    for (int x = 0; x < label.width(); ++x) {
      const std::int32_t v = label.At(y, x);
      if (v < 0 || v > 255) {
        throw LabelOutOfRange("label " + std::to_string(v) +
                              " does not fit an 8-bit mask");
      }
      m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(v);
    }
  }
  if (!cv::imwrite(path.string(), m)) {
    throw Error("cannot write mask '" + path.string() + "'");
  }
}

// Hole masks are written as 0 (removed) / 255 (kept).
inline void WriteHoleMask(const fs::path& path, const HoleMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      m.at<std::uint8_t>(y, x) = mask.At(y, x) ? 255 : 0;
  if (!cv::imwrite(path.string(), m)) {
    throw Error("cannot write mask '" + path.string() + "'");
  }
}

inline HoleMask ReadHoleMask(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw InvalidArgument("cannot decode mask '" + path.string() + "'");
  HoleMask out(m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      out.At(y, x) = m.at<std::uint8_t>(y, x) >= 128 ? 1 : 0;
  return out;
}

namespace io_internal {

inline std::map<std::string, fs::path> StemsIn(const fs::path& dir,
                                               const std::set<std::string>& exts) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (exts.count(ext)) out[e.path().stem().string()] = e.path();
  }
  return out;
}

inline std::vector<std::string> ReadStemList(const fs::path& path) {
  std::vector<std::string> stems;
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) stems.push_back(line);
  }
  return stems;
}

}  // namespace io_internal

// Stem order used when no split files are present.
inline std::vector<std::string> HashOrderedStems(std::vector<std::string> stems) {
  std::sort(stems.begin(), stems.end(), [](const std::string& a, const std::string& b) {
    const auto ha = HashString(a), hb = HashString(b);
    return ha != hb ? ha < hb : a < b;
  });
  return stems;
}

inline DatasetSplit LoadImageMaskDir(const fs::path& root, int num_classes,
                                     IgnoreLabel ignore = std::nullopt) {
  using namespace io_internal;
  const auto images = StemsIn(root / "images", {".png", ".jpg", ".jpeg"});
  const auto masks = StemsIn(root / "masks", {".png"});
  for (const auto& [stem, p] : images) {
    if (!masks.count(stem)) throw MissingPair("image '" + stem + "' has no mask");
  }
  for (const auto& [stem, p] : masks) {
    if (!images.count(stem)) throw MissingPair("mask '" + stem + "' has no image");
  }
  if (images.empty()) throw EmptyDataset("no image/mask pairs under '" + root.string() + "'");

  auto load = [&](const std::string& stem) {
    if (!images.count(stem)) {
      throw MissingPair("split file names unknown stem '" + stem + "'");
    }
    Sample s;
    s.id = stem;
    s.image = ReadImage(images.at(stem));
    s.label = ReadLabelMap(masks.at(stem));
    if (s.label.height() != s.image.height() || s.label.width() != s.image.width()) {
      throw ShapeMismatch("image and mask sizes differ for '" + stem + "'");
    }
    for (std::int32_t v : s.label) {
      if (ignore && v == *ignore) continue;
      if (v < 0 || v >= num_classes) {
        throw LabelOutOfRange("mask '" + stem + "' contains label " +
                              std::to_string(v) + " outside [0, " +
                              std::to_string(num_classes - 1) + "]");
      }
    }
    return s;
  };

  const fs::path splits = root / "splits";
  DatasetSplit d;
  d.num_classes = num_classes;
  d.ignore_label = ignore;
  if (fs::exists(splits / "train.txt")) {
    std::set<std::string> seen;
    auto fill = [&](const char* name, std::vector<Sample>& dst) {
      if (!fs::exists(splits / name)) return;
      for (const auto& stem : ReadStemList(splits / name)) {
        if (!seen.insert(stem).second) {
          throw InvalidArgument("stem '" + stem + "' listed in more than one split");
        }
        dst.push_back(load(stem));
      }
    };
    fill("train.txt", d.train);
    fill("val.txt", d.val);
    fill("test.txt", d.test);
    if (d.train.empty()) throw EmptyDataset("train split is empty");
    d.class_frequencies = ClassFrequencies(d);
    return d;
  }
  std::vector<std::string> stems;
  for (const auto& [stem, p] : images) stems.push_back(stem);
  std::vector<Sample> samples;
  for (const auto& stem : HashOrderedStems(stems)) samples.push_back(load(stem));
  return AssembleSplit(std::move(samples), num_classes, ignore);
}

// Writes a dataset in the directory layout above, including split files.
inline void SaveImageMaskDir(const fs::path& root, const DatasetSplit& d) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  fs::create_directories(root / "splits");
  auto write = [&](const char* name, const std::vector<Sample>& part) {
    std::ofstream list(root / "splits" / name);
    for (const Sample& s : part) {
      WriteImage(root / "images" / (s.id + ".png"), s.image);
      WriteLabelMap(root / "masks" / (s.id + ".png"), s.label);
      list << s.id << "\n";
    }
  };
  write("train.txt", d.train);
  write("val.txt", d.val);
  write("test.txt", d.test);
}

}  // namespace masksup::io

#endif  // MASKSUP_IO_HPP_
