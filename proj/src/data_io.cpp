#include "storm/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace storm {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

double parse_real(const std::string& text, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw InputError("row " + std::to_string(row) + ", column '" + column +
                     "': cannot parse '" + text + "' as a real");
  }
  if (!std::isfinite(value)) {
    throw InputError("row " + std::to_string(row) + ", column '" + column +
                     "': non-finite value '" + text + "'");
  }
  return value;
}

std::string format_real(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

struct ViewColumns {
  std::string name;
  std::size_t begin = 0;  // column index in the CSV
  std::size_t count = 0;
};

}  // namespace

Dataset dataset_from_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw InputError(origin + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  const auto header = split_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw InputError(origin + ": malformed header; expected 'id,label,<view>:<col>,...'");
  }
  std::vector<ViewColumns> views;
  std::vector<std::string> column_names(header.begin() + 2, header.end());
  for (std::size_t c = 0; c < column_names.size(); ++c) {
    const std::string& name = column_names[c];
    const auto colon = name.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw InputError(origin + ": malformed header column '" + name +
                       "'; expected '<view>:<col>'");
    }
    const std::string view = name.substr(0, colon);
    if (!views.empty() && views.back().name == view) {
      ++views.back().count;
    } else {
      for (const ViewColumns& v : views) {
        if (v.name == view) {
          throw InputError(origin + ": view '" + view + "' has non-contiguous columns");
        }
      }
      views.push_back({view, c + 2, 1});
    }
  }

  std::vector<Instance> instances;
  std::vector<std::string> class_order;
  std::map<std::string, std::size_t> class_counts;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      throw InputError(origin + ": row " + std::to_string(row) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    Instance inst;
    inst.id = fields[0];
    inst.label = fields[1];
    if (inst.id.empty()) {
      throw InputError(origin + ": row " + std::to_string(row) + " has an empty id");
    }
    if (inst.label.empty()) {
      throw InputError(origin + ": row " + std::to_string(row) + " has an empty label");
    }
    for (const ViewColumns& v : views) {
      FeatureVector values(v.count);
      for (std::size_t c = 0; c < v.count; ++c) {
        values[c] = parse_real(fields[v.begin + c], row, column_names[v.begin + c - 2]);
      }
      inst.views[v.name] = std::move(values);
    }
    if (class_counts.emplace(inst.label, 0).second) {
      class_order.push_back(inst.label);
    }
    ++class_counts[inst.label];
    instances.push_back(std::move(inst));
  }
  if (instances.empty()) {
    throw InputError(origin + ": no data rows");
  }
  if (class_order.size() < 2) {
    throw InputError(origin + ": datasets need at least 2 classes, found " +
                     std::to_string(class_order.size()));
  }

  // Least frequent class as the default rare designation.
  std::string rare = class_order.front();
  for (const std::string& cls : class_order) {
    if (class_counts[cls] < class_counts[rare]) {
      rare = cls;
    }
  }
  OriginalClassSet class_set{class_order, rare};
  try {
    return Dataset(std::move(class_set), std::move(instances));
  } catch (const InputError& e) {
    throw InputError(origin + ": " + e.what());
  }
}

Dataset load_csv(const std::string& path) {
  return dataset_from_csv(read_text(path), path);
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream out;
  out << "id,label";
  for (const auto& [view, dim] : dataset.view_dims()) {
    for (std::size_t c = 0; c < dim; ++c) {
      out << ',' << view << ':' << c;
    }
  }
  out << '\n';
  for (const Instance& inst : dataset.instances()) {
    out << inst.id << ',' << inst.label;
    for (const auto& [view, dim] : dataset.view_dims()) {
      (void)dim;
      const FeatureVector& values = inst.view(view);
      for (double v : values) {
        out << ',' << format_real(v);
      }
    }
    out << '\n';
  }
  return out.str();
}

void save_csv(const Dataset& dataset, const std::string& path) {
  write_text(path, dataset_to_csv(dataset));
}

Dataset project_views(const Dataset& dataset, const std::vector<std::string>& views) {
  for (const std::string& view : views) {
    if (!dataset.has_view(view)) {
      throw InputError("dataset has no view '" + view + "'");
    }
  }
  std::vector<Instance> instances;
  instances.reserve(dataset.size());
  for (const Instance& inst : dataset.instances()) {
    Instance projected;
    projected.id = inst.id;
    projected.label = inst.label;
    projected.synthetic = inst.synthetic;
    for (const std::string& view : views) {
      if (inst.has_view(view)) {
        projected.views[view] = inst.view(view);
      } else if (!inst.synthetic) {
        throw InputError("instance '" + inst.id + "' is missing view '" + view + "'");
      }
    }
    instances.push_back(std::move(projected));
  }
  return Dataset(dataset.class_set(), std::move(instances));
}

void SyntheticSpec::validate() const {
  if (classes.size() < 2) {
    throw InputError("synthetic spec needs at least 2 classes");
  }
  for (const ClassGen& cls : classes) {
    if (cls.count < 2) {
      throw InputError("synthetic class '" + cls.name + "' needs a count of at least 2, got " +
                       std::to_string(cls.count));
    }
  }
  if (views.empty()) {
    throw InputError("synthetic spec needs at least one view");
  }
  for (const ViewGen& view : views) {
    if (view.kind != "informative" && view.kind != "noise" && view.kind != "rule") {
      throw InputError("view '" + view.name + "': unknown kind '" + view.kind + "'");
    }
    if (view.dim == 0) {
      throw InputError("view '" + view.name + "': dimension must be positive");
    }
    if (!(view.sigma > 0.0)) {
      throw InputError("view '" + view.name + "': sigma must be positive");
    }
    if (view.kind == "rule" && !(view.step > 0.0)) {
      throw InputError("view '" + view.name + "': rule step must be positive");
    }
  }
  bool rare_found = false;
  for (const ClassGen& cls : classes) {
    rare_found = rare_found || cls.name == rare_class;
  }
  if (!rare_found) {
    throw InputError("rare class '" + rare_class + "' is not among the generated classes");
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Mean of class `cls` in a view: separated classes sit margin away from
  // the origin along distinct axes.
  auto mean_for = [&](const ViewGen& view, const std::string& cls) {
    FeatureVector mean(view.dim, 0.0);
    if (view.kind != "noise") {
      for (std::size_t s = 0; s < view.separates.size(); ++s) {
        if (view.separates[s] == cls) {
          mean[s % view.dim] = view.margin;
          break;
        }
      }
    }
    return mean;
  };
  auto sigma_for = [&](const ViewGen& view, const std::string& cls) {
    if (view.kind != "noise") {
      const auto it = view.class_sigma.find(cls);
      if (it != view.class_sigma.end()) {
        return it->second;
      }
    }
    return view.sigma;
  };

  std::vector<Instance> instances;
  OriginalClassSet class_set;
  class_set.rare_class = spec.rare_class;
  for (const ClassGen& cls : spec.classes) {
    class_set.classes.push_back(cls.name);
    for (std::size_t i = 0; i < cls.count; ++i) {
      Instance inst;
      inst.id = cls.name + "_" + std::to_string(i);
      inst.label = cls.name;
      for (const ViewGen& view : spec.views) {
        const FeatureVector mean = mean_for(view, cls.name);
        const double sigma = sigma_for(view, cls.name);
        FeatureVector values(view.dim);
        for (std::size_t d = 0; d < view.dim; ++d) {
          values[d] = mean[d] + sigma * rng.gaussian();
          if (view.kind == "rule") {
            values[d] = std::round(values[d] / view.step) * view.step;
          }
        }
        inst.views[view.name] = std::move(values);
      }
      instances.push_back(std::move(inst));
    }
  }
  return Dataset(std::move(class_set), std::move(instances));
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  SyntheticSpec spec;
  try {
    const Json& classes = j.at("classes");
    if (classes.is_array()) {
      for (const Json& c : classes) {
        spec.classes.push_back({c.at("name").get<std::string>(),
                                c.at("count").get<std::size_t>()});
      }
    } else {
      // Object form: class order is the file's key order.
      for (const auto& [name, count] : classes.items()) {
        spec.classes.push_back({name, count.get<std::size_t>()});
      }
    }
    spec.rare_class = j.at("rare_class").get<std::string>();
    if (j.contains("seed")) {
      spec.seed = j.at("seed").get<std::uint64_t>();
    }
    const Json& views = j.at("views");
    auto parse_view = [](const std::string& name, const Json& v) {
      ViewGen view;
      view.name = name;
      view.kind = v.at("kind").get<std::string>();
      view.dim = v.at("dim").get<std::size_t>();
      if (v.contains("margin")) view.margin = v.at("margin").get<double>();
      if (v.contains("sigma")) view.sigma = v.at("sigma").get<double>();
      if (v.contains("separates")) {
        view.separates = v.at("separates").get<std::vector<std::string>>();
      }
      if (v.contains("class_sigma")) {
        view.class_sigma = v.at("class_sigma").get<std::map<std::string, double>>();
      }
      if (v.contains("step")) {
        view.step = v.at("step").get<double>();
      }
      return view;
    };
    if (views.is_array()) {
      for (const Json& v : views) {
        spec.views.push_back(parse_view(v.at("name").get<std::string>(), v));
      }
    } else {
      for (const auto& [name, v] : views.items()) {
        spec.views.push_back(parse_view(name, v));
      }
    }
  } catch (const Json::exception& e) {
    throw InputError(std::string("malformed synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
  return synthetic_spec_from_json(load_json(path));
}

std::vector<MachineSpec> load_machine_specs(const std::string& path) {
  const Json j = load_json(path);
  std::vector<MachineSpec> specs;
  try {
    const Json& list = j.is_array() ? j : j.at("machines");
    for (const Json& m : list) {
      specs.push_back(machine_spec_from_json(m));
    }
  } catch (const Json::exception& e) {
    throw InputError(path + ": malformed machine specs: " + e.what());
  }
  if (specs.empty()) {
    throw InputError(path + ": no machine specs");
  }
  return specs;
}

Json load_json(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw InputError(path + ": invalid JSON: " + e.what());
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InputError("cannot open '" + path + "' for reading");
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InputError("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw InputError("failed writing '" + path + "'");
  }
}

}  // namespace storm
