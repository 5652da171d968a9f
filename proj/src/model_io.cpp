#include "qf/model_io.hpp"

#include <stdexcept>

namespace qf {
namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw std::invalid_argument("model json: " + field + ": " + what);
}

const nlohmann::json& need(const nlohmann::json& j, const std::string& field) {
  if (!j.contains(field)) fail(field, "missing");
  return j.at(field);
}

RVec real_vector_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  RVec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(field, "entry " + std::to_string(i) + " is not a number");
    v[static_cast<long>(i)] = j[i].get<double>();
  }
  return v;
}

nlohmann::ordered_json real_vector_to_json(const RVec& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

RMat real_matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(field, "rows must be non-empty arrays");
  RMat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(field, "ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        fail(field, "entry (" + std::to_string(r) + "," + std::to_string(c) + ") is not a number");
      m(static_cast<long>(r), static_cast<long>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Mat complex_matrix_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object with \"re\" and \"im\"");
  if (!j.contains("re")) fail(field + ".re", "missing");
  const RMat re = real_matrix_from_json(j.at("re"), field + ".re");
  Mat m = re.cast<cplx>();
  if (j.contains("im")) {
    const RMat im = real_matrix_from_json(j.at("im"), field + ".im");
    if (im.rows() != re.rows() || im.cols() != re.cols()) fail(field, "re/im shape mismatch");
    m += I1 * im.cast<cplx>();
  }
  return m;
}

ordered_json real_matrix_to_json(const RMat& m) {
  ordered_json out = ordered_json::array();
  for (long r = 0; r < m.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

ordered_json complex_matrix_to_json(const Mat& m) {
  ordered_json out;
  out["re"] = real_matrix_to_json(m.real());
  out["im"] = real_matrix_to_json(m.imag());
  return out;
}

PhaseSpaceModel phase_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("model json: expected an object");
  PhaseSpaceModel model;
  const auto& jn = need(j, "n_modes");
  if (!jn.is_number_integer() || jn.get<int>() < 1) fail("n_modes", "expected a positive integer");
  model.n_modes = jn.get<int>();
  const int d = model.dim();

  const auto& js = need(j, "S");
  if (js.is_string()) {
    if (js.get<std::string>() != "canonical") fail("S", "unknown keyword; use \"canonical\"");
    model.S = canonical_symplectic(model.n_modes);
  } else {
    model.S = real_matrix_from_json(js, "S");
  }

  model.Omega = j.contains("Omega") ? real_matrix_from_json(j.at("Omega"), "Omega")
                                    : RMat(RMat::Zero(d, d));
  model.upsilon =
      j.contains("upsilon") ? real_vector_from_json(j.at("upsilon"), "upsilon") : RVec(RVec::Zero(d));
  model.theta0 =
      j.contains("theta0") ? real_vector_from_json(j.at("theta0"), "theta0") : RVec(RVec::Zero(d));
  model.P0 = j.contains("P0") ? real_matrix_from_json(j.at("P0"), "P0")
                              : RMat(RMat::Identity(d, d));

  const auto& jch = need(j, "channels");
  if (!jch.is_array()) fail("channels", "expected an array");
  for (std::size_t i = 0; i < jch.size(); ++i) {
    const std::string field = "channels[" + std::to_string(i) + "]";
    const auto& jc = jch[i];
    if (!jc.is_object()) fail(field, "expected an object");
    PhaseChannel ch;
    const auto& jz = need(jc, "zeta");
    if (!jz.is_array() || static_cast<int>(jz.size()) != d)
      fail(field + ".zeta", "expected " + std::to_string(d) + " [re, im] pairs");
    ch.zeta.resize(d);
    for (int a = 0; a < d; ++a) {
      const auto& pair = jz[a];
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
        fail(field + ".zeta", "entry " + std::to_string(a) + " is not an [re, im] pair");
      ch.zeta[a] = cplx(pair[0].get<double>(), pair[1].get<double>());
    }
    ch.weight = jc.value("weight", 1.0);
    ch.observed = jc.value("observed", true);
    const std::string kind = jc.value("kind", std::string("complex"));
    if (kind == "complex")
      ch.kind = Detection::heterodyne;
    else if (kind == "real")
      ch.kind = Detection::homodyne;
    else
      fail(field + ".kind", "expected \"real\" or \"complex\"");
    model.channels.push_back(std::move(ch));
  }
  model.validate();
  return model;
}

ordered_json phase_model_to_json(const PhaseSpaceModel& model) {
  ordered_json out;
  out["n_modes"] = model.n_modes;
  if (model.S == canonical_symplectic(model.n_modes))
    out["S"] = "canonical";
  else
    out["S"] = real_matrix_to_json(model.S);
  out["Omega"] = real_matrix_to_json(model.Omega);
  out["upsilon"] = real_vector_to_json(model.upsilon);
  out["theta0"] = real_vector_to_json(model.theta0);
  out["P0"] = real_matrix_to_json(model.P0);
  out["channels"] = ordered_json::array();
  for (const auto& ch : model.channels) {
    ordered_json jc;
    ordered_json jz = ordered_json::array();
    for (long a = 0; a < ch.zeta.size(); ++a)
      jz.push_back(ordered_json::array({ch.zeta[a].real(), ch.zeta[a].imag()}));
    jc["zeta"] = std::move(jz);
    jc["weight"] = ch.weight;
    jc["observed"] = ch.observed;
    jc["kind"] = ch.kind == Detection::heterodyne ? "complex" : "real";
    out["channels"].push_back(std::move(jc));
  }
  return out;
}

FilterModel filter_model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("model json: expected an object");
  FilterModel model;
  model.H = complex_matrix_from_json(need(j, "H"), "H");
  model.rho0 = complex_matrix_from_json(need(j, "rho0"), "rho0");
  const auto& jch = need(j, "channels");
  if (!jch.is_array()) fail("channels", "expected an array");
  for (std::size_t i = 0; i < jch.size(); ++i) {
    const std::string field = "channels[" + std::to_string(i) + "]";
    const auto& jc = jch[i];
    if (!jc.is_object()) fail(field, "expected an object");
    MeasurementChannel ch;
    ch.L = complex_matrix_from_json(need(jc, "L"), field + ".L");
    ch.weight = jc.value("weight", 1.0);
    const std::string kind = jc.value("kind", std::string("homodyne"));
    if (kind == "homodyne")
      ch.kind = Detection::homodyne;
    else if (kind == "heterodyne")
      ch.kind = Detection::heterodyne;
    else
      fail(field + ".kind", "expected \"homodyne\" or \"heterodyne\"");
    if (jc.contains("group")) {
      if (!jc.at("group").is_number_integer()) fail(field + ".group", "expected an integer");
      ch.group_id = jc.at("group").get<int>();
    }
    model.channels.push_back(std::move(ch));
  }
  return model;
}

ordered_json filter_model_to_json(const FilterModel& model) {
  ordered_json out;
  out["H"] = complex_matrix_to_json(model.H);
  out["rho0"] = complex_matrix_to_json(model.rho0);
  out["channels"] = ordered_json::array();
  for (const auto& ch : model.channels) {
    ordered_json jc;
    jc["L"] = complex_matrix_to_json(ch.L);
    jc["weight"] = ch.weight;
    jc["kind"] = ch.kind == Detection::heterodyne ? "heterodyne" : "homodyne";
    if (ch.group_id) jc["group"] = *ch.group_id;
    out["channels"].push_back(std::move(jc));
  }
  return out;
}

}  // namespace qf
