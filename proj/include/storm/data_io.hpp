#pragma once

#include <map>
#include <string>
#include <vector>

#include "storm/core.hpp"
#include "storm/machines.hpp"

namespace storm {

// Dataset CSV format (UTF-8, LF line endings, '.' decimal separator):
//
//   id,label,<view>:<col0>,<view>:<col1>,...
//
// Columns of one view are contiguous; reals are written with 17 significant
// digits so doubles round-trip losslessly. The rare class is a runtime
// attribute: loading designates the least frequent class (ties resolve to
// first appearance) and the caller may override it.

Dataset load_csv(const std::string& path);
Dataset dataset_from_csv(const std::string& text, const std::string& origin);

void save_csv(const Dataset& dataset, const std::string& path);
std::string dataset_to_csv(const Dataset& dataset);

// Restriction of a dataset to a subset of its views (instances unchanged
// otherwise). Used to serialize SMOTE-augmented data, whose synthetic
// instances carry a single view.
Dataset project_views(const Dataset& dataset, const std::vector<std::string>& views);

// Synthetic benchmark generator. An informative view places the classes
// listed in `separates` at distinct means (margin apart along distinct
// axes); everything else sits at the origin. A noise view draws every class
// from the same distribution. A rule view is an informative view quantized
// to a grid of the given step, the shape of expert rule features (counts,
// threshold indicators): instances of a concentrated class mostly land on
// the same grid points. class_sigma widens or narrows single classes.
struct ViewGen {
  std::string name;
  std::string kind;  // "informative" | "noise" | "rule"
  std::size_t dim = 2;
  double margin = 8.0;
  double sigma = 1.0;
  std::vector<std::string> separates;
  std::map<std::string, double> class_sigma;
  double step = 1.0;  // rule views only
};

struct ClassGen {
  std::string name;
  std::size_t count = 0;
};

struct SyntheticSpec {
  std::vector<ClassGen> classes;
  std::string rare_class;
  std::uint64_t seed = 0;
  std::vector<ViewGen> views;

  void validate() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec);

SyntheticSpec synthetic_spec_from_json(const Json& j);
SyntheticSpec load_synthetic_spec(const std::string& path);

std::vector<MachineSpec> load_machine_specs(const std::string& path);

Json load_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace storm
