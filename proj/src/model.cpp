#include "shapereg/model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "shapereg/errors.hpp"

namespace shapereg {

using nlohmann::json;

FittedModel FittedModel::from_additive(const AdditiveFit& fit, const ShapeVector& shapes,
                                       const ExponentialFamily& family,
                                       const SolverOptions& opts, std::uint64_t seed) {
  FittedModel m;
  m.kind = Kind::Additive;
  m.family = family;
  m.shapes = shapes;
  m.intercept = fit.intercept;
  m.components = fit.components;
  m.metadata = {fit.fitted_eta.size(),
                static_cast<int>(shapes.size()),
                0,
                seed,
                opts.eps_irls,
                opts.eta_cap,
                fit.converged,
                fit.loglik,
                fit.iterations,
                kVersion};
  return m;
}

FittedModel FittedModel::from_index(const IndexFit& fit, const ShapeVector& ridge_shapes,
                                    const ExponentialFamily& family, const SolverOptions& opts,
                                    std::uint64_t seed) {
  FittedModel m;
  m.kind = Kind::Index;
  m.family = family;
  m.shapes = ridge_shapes;
  m.intercept = fit.ridge_fit.intercept;
  m.components = fit.ridge_fit.components;
  m.index_matrix = fit.index_matrix;
  m.delta = fit.delta;
  m.metadata = {fit.ridge_fit.fitted_eta.size(),
                static_cast<int>(fit.index_matrix.rows()),
                static_cast<int>(fit.index_matrix.cols()),
                seed,
                opts.eps_irls,
                opts.eta_cap,
                fit.ridge_fit.converged,
                fit.ridge_fit.loglik,
                fit.ridge_fit.iterations,
                kVersion};
  return m;
}

Eigen::VectorXd predict_eta(const FittedModel& model, const Eigen::MatrixXd& Xnew) {
  const Eigen::Index expected =
      model.kind == FittedModel::Kind::Index ? model.index_matrix.rows()
                                             : static_cast<Eigen::Index>(model.shapes.size());
  if (Xnew.cols() != expected)
    throw DimensionError("prediction covariates have " + std::to_string(Xnew.cols()) +
                         " columns, model expects " + std::to_string(expected));
  const Eigen::MatrixXd Z =
      model.kind == FittedModel::Kind::Index ? (Xnew * model.index_matrix).eval() : Xnew;
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(Z.rows(), model.intercept);
  for (std::size_t j = 0; j < model.components.size(); ++j)
    for (Eigen::Index i = 0; i < Z.rows(); ++i)
      eta[i] += component_eval(model.components[j], Z(i, static_cast<Eigen::Index>(j)));
  return eta;
}

Eigen::VectorXd predict_mean(const FittedModel& model, const Eigen::MatrixXd& Xnew) {
  Eigen::VectorXd eta = predict_eta(model, Xnew);
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = model.family.inv_link(eta[i]);
  return eta;
}

Prediction predict(const FittedModel& model, const Eigen::MatrixXd& Xnew) {
  Prediction out;
  out.eta = predict_eta(model, Xnew);
  out.mean = out.eta;
  out.saturated.assign(out.eta.size(), 0);
  const bool can_saturate =
      model.family.kind == Family::Poisson || model.family.kind == Family::Binomial;
  for (Eigen::Index i = 0; i < out.eta.size(); ++i) {
    out.mean[i] = model.family.inv_link(out.eta[i]);
    if (can_saturate && std::abs(out.eta[i]) >= model.metadata.eta_cap) out.saturated[i] = 1;
  }
  return out;
}

std::string save_model(const FittedModel& model) {
  json j;
  j["schema_version"] = kModelSchemaVersion;
  j["kind"] = model.kind == FittedModel::Kind::Index ? "index" : "additive";
  j["family"] = {{"name", model.family.name()}, {"trials", model.family.trials}};
  json shapes = json::array();
  for (Shape s : model.shapes) shapes.push_back(label(s));
  j["shapes"] = std::move(shapes);
  j["intercept"] = model.intercept;
  json comps = json::array();
  for (const ComponentFit& c : model.components)
    comps.push_back(
        {{"label", label(c.shape)}, {"knots", c.knots}, {"weights", c.weights}});
  j["components"] = std::move(comps);
  if (model.kind == FittedModel::Kind::Index) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < model.index_matrix.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index k = 0; k < model.index_matrix.cols(); ++k)
        row.push_back(model.index_matrix(i, k));
      rows.push_back(std::move(row));
    }
    j["index_matrix"] = std::move(rows);
    j["delta"] = model.delta;
  }
  j["metadata"] = {{"n", model.metadata.n},
                   {"d", model.metadata.d},
                   {"m", model.metadata.m},
                   {"seed", model.metadata.seed},
                   {"eps_irls", model.metadata.eps_irls},
                   {"eta_cap", model.metadata.eta_cap},
                   {"converged", model.metadata.converged},
                   {"loglik", model.metadata.loglik},
                   {"iterations", model.metadata.iterations},
                   {"version", model.metadata.version}};
  return j.dump(2);
}

FittedModel load_model(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ModelIoError(std::string("corrupt model payload: ") + e.what());
  }
  try {
    const int version = j.at("schema_version").get<int>();
    if (version > kModelSchemaVersion)
      throw ModelIoError("model schema version " + std::to_string(version) +
                             " is newer than supported version " +
                             std::to_string(kModelSchemaVersion),
                         true);
    FittedModel m;
    m.kind = j.at("kind").get<std::string>() == "index" ? FittedModel::Kind::Index
                                                        : FittedModel::Kind::Additive;
    m.family.kind = family_from_name(j.at("family").at("name").get<std::string>());
    m.family.trials = j.at("family").at("trials").get<int>();
    for (int lbl : j.at("shapes")) m.shapes.push_back(shape_from_label(lbl));
    m.intercept = j.at("intercept").get<double>();
    for (const json& c : j.at("components")) {
      ComponentFit comp;
      comp.shape = shape_from_label(c.at("label").get<int>());
      comp.knots = c.at("knots").get<std::vector<double>>();
      comp.weights = c.at("weights").get<std::vector<double>>();
      m.components.push_back(std::move(comp));
    }
    if (m.kind == FittedModel::Kind::Index) {
      const json& rows = j.at("index_matrix");
      const Eigen::Index d = static_cast<Eigen::Index>(rows.size());
      const Eigen::Index mm = d ? static_cast<Eigen::Index>(rows[0].size()) : 0;
      m.index_matrix.resize(d, mm);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < mm; ++k) m.index_matrix(i, k) = rows[i][k].get<double>();
      m.delta = j.value("delta", 0.0);
    }
    const json& md = j.at("metadata");
    m.metadata.n = md.at("n").get<std::int64_t>();
    m.metadata.d = md.at("d").get<int>();
    m.metadata.m = md.at("m").get<int>();
    m.metadata.seed = md.at("seed").get<std::uint64_t>();
    m.metadata.eps_irls = md.at("eps_irls").get<double>();
    m.metadata.eta_cap = md.at("eta_cap").get<double>();
    m.metadata.converged = md.at("converged").get<bool>();
    m.metadata.loglik = md.at("loglik").get<double>();
    m.metadata.iterations = md.at("iterations").get<int>();
    m.metadata.version = md.at("version").get<std::string>();
    return m;
  } catch (const ModelIoError&) {
    throw;
  } catch (const json::exception& e) {
    throw ModelIoError(std::string("malformed model document: ") + e.what());
  }
}

void save_model_file(const FittedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ModelIoError("cannot open " + path.string() + " for writing");
  out << save_model(model) << '\n';
}

FittedModel load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelIoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_model(buf.str());
}

}  // namespace shapereg
