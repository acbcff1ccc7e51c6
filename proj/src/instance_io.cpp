#include "galb/instance_io.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace galb {

using nlohmann::json;

namespace {

class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  int integer(const char* key) {
    if (!present(key)) return 0;
    const json& v = doc_.at(key);
    if (!v.is_number_integer()) {
      issue(std::string(key) + " must be an integer");
      return 0;
    }
    return v.get<int>();
  }

  bool boolean(const char* key, bool fallback) {
    if (!doc_.contains(key)) return fallback;
    const json& v = doc_.at(key);
    if (!v.is_boolean()) {
      issue(std::string(key) + " must be a boolean");
      return fallback;
    }
    return v.get<bool>();
  }

  std::vector<int> vector(const char* key) {
    std::vector<int> out;
    if (!present(key)) return out;
    const json& v = doc_.at(key);
    if (!v.is_array()) {
      issue(std::string(key) + " must be an array of integers");
      return out;
    }
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number_integer()) {
        issue(std::string(key) + "[" + std::to_string(k) + "] must be an integer");
        return {};
      }
      out.push_back(v[k].get<int>());
    }
    return out;
  }

  Grid<int> matrix(const char* key) {
    if (!present(key)) return {};
    const json& v = doc_.at(key);
    if (!v.is_array() || v.empty()) {
      issue(std::string(key) + " must be a non-empty array of rows");
      return {};
    }
    const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
    Grid<int> out(v.size(), cols, 0);
    for (std::size_t r = 0; r < v.size(); ++r) {
      if (!v[r].is_array() || v[r].size() != cols) {
        issue(std::string(key) + " row " + std::to_string(r) + " is not an array of length " + std::to_string(cols));
        return {};
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (!v[r][c].is_number_integer()) {
          issue(std::string(key) + "[" + std::to_string(r) + "][" + std::to_string(c) + "] must be an integer");
          return {};
        }
        out(r, c) = v[r][c].get<int>();
      }
    }
    return out;
  }

  std::vector<std::string>& issues() { return issues_; }

 private:
  bool present(const char* key) {
    if (doc_.contains(key)) return true;
    issue(std::string("missing field ") + key);
    return false;
  }
  void issue(std::string message) { issues_.push_back(std::move(message)); }

  const json& doc_;
  std::vector<std::string> issues_;
};

json matrix_json(const Grid<int>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<int>(row.begin(), row.end()));
  }
  return rows;
}

Grid<int> from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  Grid<int> g(rows.size(), rows.begin()->size(), 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    std::size_t c = 0;
    for (int v : row) g(r, c++) = v;
    ++r;
  }
  return g;
}

}  // namespace

FactoryConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw InstanceError({"instance document must be a JSON object"});
  Reader in(doc);
  FactoryConfig c;
  c.num_workstations = in.integer("num_workstations");
  c.num_tasks = in.integer("num_tasks");
  c.num_resources = in.integer("num_resources");
  c.horizon = in.integer("horizon");
  c.occupancy_caps = in.vector("occupancy_caps");
  c.buffer_caps = in.matrix("buffer_caps");
  c.durations = in.matrix("durations");
  c.deadlines = in.vector("deadlines");
  c.precedence = in.matrix("precedence");
  c.resource_needs = in.matrix("resource_needs");
  c.inventories = in.vector("inventories");
  c.returnable_resources = in.boolean("returnable_resources", false);
  if (!in.issues().empty()) throw InstanceError(std::move(in.issues()));
  c.validate();
  return c;
}

json config_to_json(const FactoryConfig& c) {
  return json{{"num_workstations", c.num_workstations},
              {"num_tasks", c.num_tasks},
              {"num_resources", c.num_resources},
              {"horizon", c.horizon},
              {"occupancy_caps", c.occupancy_caps},
              {"buffer_caps", matrix_json(c.buffer_caps)},
              {"durations", matrix_json(c.durations)},
              {"deadlines", c.deadlines},
              {"precedence", matrix_json(c.precedence)},
              {"resource_needs", matrix_json(c.resource_needs)},
              {"inventories", c.inventories},
              {"returnable_resources", c.returnable_resources}};
}

FactoryConfig load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InstanceError({"cannot open instance file " + path.string()});
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InstanceError({path.string() + ": " + e.what()});
  }
  return config_from_json(doc);
}

void save_instance(const FactoryConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_to_json(config).dump(2) << '\n';
}

FactoryConfig reference_instance() {
  FactoryConfig c;
  c.num_workstations = 3;
  c.num_tasks = 5;
  c.num_resources = 2;
  c.horizon = 20;
  c.occupancy_caps = {1, 3, 1};
  c.buffer_caps = from_rows({{50, 50}, {50, 50}, {50, 50}});
  c.durations = from_rows({{4, 5, 8, 5, 2}, {5, 6, 12, 3, 6}, {3, 4, 5, 3, 5}});
  c.deadlines = {20, 20, 20, 20, 20};
  c.resource_needs = from_rows({{13, 12}, {6, 7}, {4, 3}, {2, 4}, {3, 5}});
  c.precedence = from_rows({{0, 1, 0, 0, 1}, {-1, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 1}, {-1, 0, 0, -1, 0}});
  c.inventories = {1000, 2000};
  c.returnable_resources = false;
  c.validate();
  return c;
}

FactoryConfig synthetic_instance(int workstations, int tasks, std::uint64_t seed) {
  if (workstations < 1 || tasks < 1) throw std::invalid_argument("need at least one workstation and one task");
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int I = workstations, J = tasks, R = 2;
  FactoryConfig c;
  c.num_workstations = I;
  c.num_tasks = J;
  c.num_resources = R;
  for (int i = 0; i < I; ++i) c.occupancy_caps.push_back(pick(1, 3));
  c.durations = Grid<int>(I, J, 1);
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < J; ++j) c.durations(i, j) = pick(2, 8);
  // Each task may wait on one earlier task, so the graph is acyclic.
  c.precedence = Grid<int>(J, J, 0);
  for (int j = 1; j < J; ++j)
    if (pick(0, 1) == 1) {
      const int before = pick(0, j - 1);
      c.precedence(before, j) = 1;
      c.precedence(j, before) = -1;
    }
  c.resource_needs = Grid<int>(J, R, 0);
  for (int j = 0; j < J; ++j)
    for (int r = 0; r < R; ++r) c.resource_needs(j, r) = pick(1, 5);
  c.buffer_caps = Grid<int>(I, R, 5 * 3);
  for (int r = 0; r < R; ++r) {
    int total = 0;
    for (int j = 0; j < J; ++j) total += c.resource_needs(j, r);
    c.inventories.push_back(total + pick(0, 10));
  }
  // A serial schedule on the fastest workstation per task needs D + 1 steps each.
  int serial = 0;
  for (int j = 0; j < J; ++j) {
    int fastest = c.durations(0, j);
    for (int i = 1; i < I; ++i) fastest = std::min(fastest, c.durations(i, j));
    serial += fastest + 1;
  }
  c.horizon = serial + 5;
  c.deadlines.assign(J, c.horizon);
  c.returnable_resources = false;
  c.validate();
  return c;
}

}  // namespace galb
