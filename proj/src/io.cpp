#include "fpca/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fpca {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

double parse_number(const std::string& text, const std::string& path, int line,
                    const char* what) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size()) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": could not parse " +
                             what + " '" + text + "'");
  }
  return value;
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

void append_escaped(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

void append_array(std::string& out, const Eigen::VectorXd& v) {
  out.push_back('[');
  for (int i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    out += format_double(v(i));
  }
  out.push_back(']');
}

void append_row_arrays(std::string& out, const Eigen::MatrixXd& m) {
  out.push_back('[');
  for (int r = 0; r < m.rows(); ++r) {
    if (r) out.push_back(',');
    append_array(out, m.row(r).transpose());
  }
  out.push_back(']');
}

void append_flat_row_major(std::string& out, const Eigen::MatrixXd& m) {
  out.push_back('[');
  bool first = true;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!first) out.push_back(',');
      first = false;
      out += format_double(m(r, c));
    }
  }
  out.push_back(']');
}

void append_string_array(std::string& out, const std::vector<std::string>& v) {
  out.push_back('[');
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    append_escaped(out, v[i]);
  }
  out.push_back(']');
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(j.size());
  int i = 0;
  for (const auto& x : j) v(i++) = x.get<double>();
  return v;
}

bool any_group(const std::vector<std::string>& groups) {
  return std::any_of(groups.begin(), groups.end(),
                     [](const std::string& g) { return !g.empty(); });
}

}  // namespace

std::vector<LongitudinalSample> ingest_csv(const std::string& path,
                                           const std::string& group_col) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  const int id_col = find_column(header, "id");
  const int time_col = find_column(header, "time");
  const int value_col = find_column(header, "value");
  const int grp_col = find_column(header, group_col);
  if (id_col < 0) throw std::runtime_error(path + ": missing column: id");
  if (time_col < 0) throw std::runtime_error(path + ": missing column: time");
  if (value_col < 0) throw std::runtime_error(path + ": missing column: value");

  struct Obs {
    double time;
    double value;
    int line;
  };
  std::map<std::string, int> position;
  std::vector<std::string> ids;
  std::vector<std::vector<Obs>> observations;
  std::vector<std::string> groups;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const int needed = std::max({id_col, time_col, value_col, grp_col});
    if (static_cast<int>(fields.size()) <= needed) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": too few columns");
    }
    const std::string& id = fields[id_col];
    if (id.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty id");
    }
    const double t = parse_number(fields[time_col], path, line_no, "time");
    const double y = parse_number(fields[value_col], path, line_no, "value");

    auto [it, inserted] = position.insert({id, static_cast<int>(ids.size())});
    if (inserted) {
      ids.push_back(id);
      observations.emplace_back();
      groups.push_back(grp_col >= 0 ? fields[grp_col] : "");
    } else if (grp_col >= 0 && fields[grp_col] != groups[it->second]) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": conflicting group for subject " + id);
    }
    observations[it->second].push_back({t, y, line_no});
  }
  if (ids.empty()) throw std::runtime_error(path + ": no samples");

  std::vector<LongitudinalSample> samples(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto& obs = observations[i];
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Obs& a, const Obs& b) { return a.time < b.time; });
    for (std::size_t j = 1; j < obs.size(); ++j) {
      if (obs[j].time == obs[j - 1].time) {
        throw std::runtime_error(path + ":" +
                                 std::to_string(std::max(obs[j].line, obs[j - 1].line)) +
                                 ": duplicate time for subject " + ids[i]);
      }
    }
    samples[i].subject_id = ids[i];
    samples[i].group = groups[i];
    samples[i].times.reserve(obs.size());
    samples[i].values.reserve(obs.size());
    for (const auto& o : obs) {
      samples[i].times.push_back(o.time);
      samples[i].values.push_back(o.value);
    }
    validate_sample(samples[i]);
  }
  return samples;
}

std::string cohort_to_csv(const std::vector<LongitudinalSample>& samples) {
  bool with_group = false;
  for (const auto& s : samples) with_group = with_group || !s.group.empty();
  std::string out = with_group ? "id,time,value,group\n" : "id,time,value\n";
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      out += s.subject_id;
      out.push_back(',');
      out += format_double(s.times[j]);
      out.push_back(',');
      out += format_double(s.values[j]);
      if (with_group) {
        out.push_back(',');
        out += s.group;
      }
      out.push_back('\n');
    }
  }
  return out;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("cannot write file: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot write file: " + path);
  }
}

std::string model_to_json(const FpcaModel& model) {
  std::string out = "{\n";
  out += "  \"grid_points\": ";
  append_array(out, model.grid.points);
  out += ",\n  \"mean\": ";
  append_array(out, model.mean);
  out += ",\n  \"covariance\": ";
  append_flat_row_major(out, model.cov);
  out += ",\n  \"sigma2\": " + format_double(model.sigma2);
  out += ",\n  \"eigenvalues\": ";
  append_array(out, model.eigenvalues);
  out += ",\n  \"eigenfunctions\": ";
  append_row_arrays(out, model.eigenfunctions);
  out += ",\n  \"fve\": ";
  append_array(out, model.fve);
  out += ",\n  \"k\": " + std::to_string(model.k);
  out += ",\n  \"scores\": ";
  append_row_arrays(out, model.scores);
  out += ",\n  \"subject_ids\": ";
  append_string_array(out, model.subject_ids);
  out += ",\n  \"groups\": ";
  append_string_array(out, model.groups);
  out += ",\n  \"score_ridge\": " + format_double(model.score_ridge);
  out += ",\n  \"mean_bandwidth\": {\"h\": " + format_double(model.mean_bandwidth.h) +
         ", \"fallback\": " + (model.mean_bandwidth.fallback ? "true" : "false") + "}";
  out += ",\n  \"cov_bandwidth\": {\"h\": " + format_double(model.cov_bandwidth.h) +
         ", \"fallback\": " + (model.cov_bandwidth.fallback ? "true" : "false") + "}";
  out += "\n}\n";
  return out;
}

FpcaModel model_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model json: ") + e.what());
  }
  FpcaModel model;
  try {
    model.grid = grid_from_points(vector_from_json(j.at("grid_points")));
    const int m = model.grid.size();
    model.mean = vector_from_json(j.at("mean"));
    if (model.mean.size() != m) throw std::runtime_error("mean length mismatch");

    const Eigen::VectorXd flat = vector_from_json(j.at("covariance"));
    if (flat.size() != static_cast<long>(m) * m) {
      throw std::runtime_error("covariance size mismatch");
    }
    model.cov.resize(m, m);
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) model.cov(r, c) = flat(r * m + c);
    }

    model.sigma2 = j.at("sigma2").get<double>();
    model.eigenvalues = vector_from_json(j.at("eigenvalues"));
    model.k = j.at("k").get<int>();
    if (model.eigenvalues.size() != model.k) {
      throw std::runtime_error("eigenvalue count mismatch");
    }

    const auto& funcs = j.at("eigenfunctions");
    if (static_cast<int>(funcs.size()) != model.k) {
      throw std::runtime_error("eigenfunction count mismatch");
    }
    model.eigenfunctions.resize(model.k, m);
    for (int r = 0; r < model.k; ++r) {
      const Eigen::VectorXd row = vector_from_json(funcs[r]);
      if (row.size() != m) throw std::runtime_error("eigenfunction length mismatch");
      model.eigenfunctions.row(r) = row.transpose();
    }

    model.fve = vector_from_json(j.at("fve"));
    model.subject_ids = j.at("subject_ids").get<std::vector<std::string>>();
    model.groups = j.at("groups").get<std::vector<std::string>>();

    const auto& scores = j.at("scores");
    if (scores.size() != model.subject_ids.size()) {
      throw std::runtime_error("score row count mismatch");
    }
    model.scores.resize(static_cast<int>(scores.size()), model.k);
    for (int r = 0; r < static_cast<int>(scores.size()); ++r) {
      const Eigen::VectorXd row = vector_from_json(scores[r]);
      if (row.size() != model.k) throw std::runtime_error("score length mismatch");
      model.scores.row(r) = row.transpose();
    }

    if (j.contains("score_ridge")) {
      model.score_ridge = j.at("score_ridge").get<double>();
    } else if (model.k > 0) {
      model.score_ridge = 1e-8 * model.eigenvalues(0);
    }
    if (j.contains("mean_bandwidth")) {
      model.mean_bandwidth.h = j.at("mean_bandwidth").at("h").get<double>();
      model.mean_bandwidth.fallback = j.at("mean_bandwidth").at("fallback").get<bool>();
    }
    if (j.contains("cov_bandwidth")) {
      model.cov_bandwidth.h = j.at("cov_bandwidth").at("h").get<double>();
      model.cov_bandwidth.fallback = j.at("cov_bandwidth").at("fallback").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model json: ") + e.what());
  }
  return model;
}

std::string test_result_to_json(const PermutationTestResult& result,
                                const std::string& test_name) {
  std::string out = "{\n  \"test\": ";
  append_escaped(out, test_name);
  out += ",\n  \"statistic\": " + format_double(result.statistic);
  out += ",\n  \"p_global\": " + format_double(result.p_global);
  out += ",\n  \"replicates\": " + std::to_string(result.replicates);
  out += ",\n  \"seed\": " + std::to_string(result.seed);
  out += ",\n  \"pairwise\": [";
  for (std::size_t i = 0; i < result.pairwise.size(); ++i) {
    const auto& p = result.pairwise[i];
    if (i) out.push_back(',');
    out += "\n    {\"group_u\": ";
    append_escaped(out, p.group_u);
    out += ", \"group_v\": ";
    append_escaped(out, p.group_v);
    out += ", \"statistic\": " + format_double(p.statistic);
    out += ", \"p_value\": " + format_double(p.p_value) + "}";
  }
  out += "\n  ]\n}\n";
  return out;
}

std::string gof_to_json(const GofResult& result) {
  std::string out = "{\n";
  out += "  \"repeats\": " + std::to_string(result.repeats);
  out += ",\n  \"folds\": " + std::to_string(result.folds);
  out += ",\n  \"seed\": " + std::to_string(result.seed);
  out += ",\n  \"group_labels\": ";
  append_string_array(out, result.group_labels);
  out += ",\n  \"full_on_all\": [";
  for (std::size_t r = 0; r < result.full_on_all.size(); ++r) {
    if (r) out.push_back(',');
    out += format_double(result.full_on_all[r]);
  }
  out += "]";
  const auto nested = [&](const char* key, const std::vector<std::vector<double>>& rows) {
    out += ",\n  \"";
    out += key;
    out += "\": [";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (r) out.push_back(',');
      out.push_back('[');
      for (std::size_t g = 0; g < rows[r].size(); ++g) {
        if (g) out.push_back(',');
        out += format_double(rows[r][g]);
      }
      out.push_back(']');
    }
    out += "]";
  };
  nested("full_on_group", result.full_on_group);
  nested("group_on_group", result.group_on_group);
  out += "\n}\n";
  return out;
}

std::string gof_to_csv(const GofResult& result) {
  std::string out = "repeat,model_scope,eval_group,root_macse\n";
  for (int r = 0; r < result.repeats; ++r) {
    const std::string rep = std::to_string(r + 1);
    out += rep + ",full,all," + format_double(result.full_on_all[r]) + "\n";
    for (std::size_t g = 0; g < result.group_labels.size(); ++g) {
      out += rep + ",full," + result.group_labels[g] + "," +
             format_double(result.full_on_group[r][g]) + "\n";
    }
    for (std::size_t g = 0; g < result.group_labels.size(); ++g) {
      out += rep + ",group," + result.group_labels[g] + "," +
             format_double(result.group_on_group[r][g]) + "\n";
    }
  }
  return out;
}

std::string future_to_json(const FutureAccuracy& result) {
  std::string out = "{\n";
  out += "  \"evaluated_subjects\": " + std::to_string(result.evaluated_subjects);
  out += ",\n  \"excluded_subjects\": " + std::to_string(result.excluded_subjects);
  out += ",\n  \"group_labels\": ";
  append_string_array(out, result.group_labels);
  out += ",\n  \"full_on_all\": " + format_double(result.full_on_all);
  out += ",\n  \"full_on_group\": [";
  for (std::size_t g = 0; g < result.full_on_group.size(); ++g) {
    if (g) out.push_back(',');
    out += format_double(result.full_on_group[g]);
  }
  out += "],\n  \"group_on_group\": [";
  for (std::size_t g = 0; g < result.group_on_group.size(); ++g) {
    if (g) out.push_back(',');
    out += format_double(result.group_on_group[g]);
  }
  out += "]\n}\n";
  return out;
}

std::string future_to_csv(const FutureAccuracy& result) {
  std::string out = "model_scope,eval_group,root_mse\n";
  out += "full,all," + format_double(result.full_on_all) + "\n";
  for (std::size_t g = 0; g < result.group_labels.size(); ++g) {
    out += "full," + result.group_labels[g] + "," + format_double(result.full_on_group[g]) +
           "\n";
  }
  for (std::size_t g = 0; g < result.group_labels.size(); ++g) {
    out += "group," + result.group_labels[g] + "," +
           format_double(result.group_on_group[g]) + "\n";
  }
  return out;
}

std::string curves_to_csv(const CurveMatrix& curves) {
  const bool with_group = any_group(curves.groups);
  std::string out = with_group ? "id,time,value,group\n" : "id,time,value\n";
  for (int i = 0; i < curves.n_curves(); ++i) {
    for (int m = 0; m < curves.grid.size(); ++m) {
      out += curves.subject_ids[i];
      out.push_back(',');
      out += format_double(curves.grid.points(m));
      out.push_back(',');
      out += format_double(curves.rows(i, m));
      if (with_group) {
        out.push_back(',');
        out += curves.groups[i];
      }
      out.push_back('\n');
    }
  }
  return out;
}

std::string mean_to_csv(const FpcaModel& model) {
  std::string out = "time,mean\n";
  for (int m = 0; m < model.grid.size(); ++m) {
    out += format_double(model.grid.points(m)) + "," + format_double(model.mean(m)) + "\n";
  }
  return out;
}

std::string eigenfunctions_to_csv(const FpcaModel& model) {
  std::string out = "time";
  for (int k = 0; k < model.k; ++k) out += ",component_" + std::to_string(k + 1);
  out.push_back('\n');
  for (int m = 0; m < model.grid.size(); ++m) {
    out += format_double(model.grid.points(m));
    for (int k = 0; k < model.k; ++k) {
      out.push_back(',');
      out += format_double(model.eigenfunctions(k, m));
    }
    out.push_back('\n');
  }
  return out;
}

std::string scores_to_csv(const FpcaModel& model) {
  std::string out = "id,group";
  for (int k = 0; k < model.k; ++k) out += ",score_" + std::to_string(k + 1);
  out.push_back('\n');
  for (std::size_t i = 0; i < model.subject_ids.size(); ++i) {
    out += model.subject_ids[i];
    out.push_back(',');
    out += model.groups[i];
    for (int k = 0; k < model.k; ++k) {
      out.push_back(',');
      out += format_double(model.scores(static_cast<int>(i), k));
    }
    out.push_back('\n');
  }
  return out;
}

std::string fve_to_csv(const FpcaModel& model) {
  std::string out = "component,eigenvalue,fve\n";
  for (int k = 0; k < model.k; ++k) {
    out += std::to_string(k + 1) + "," + format_double(model.eigenvalues(k)) + "," +
           format_double(model.fve(k)) + "\n";
  }
  return out;
}

}  // namespace fpca
