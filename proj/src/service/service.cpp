#include "e2emd/service/service.hpp"

#include <cstdlib>

#include "e2emd/data/image.hpp"
#include "e2emd/model/predict.hpp"
#include "e2emd/model/weight_io.hpp"
#include "e2emd/pointcloud/formats.hpp"
#include "httplib.h"

namespace e2emd::service {

using nlohmann::json;

namespace {

// Room for multipart boundaries and part headers on top of the file itself.
constexpr std::size_t kMultipartSlack = 64 * 1024;

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Reply too_large(std::size_t size, std::size_t limit) {
  return error_reply(413, "payload_too_large",
                     "upload of " + std::to_string(size) + " bytes exceeds the " + std::to_string(limit) + " byte limit");
}

Reply not_loaded() { return error_reply(503, "model_not_loaded", "model weights are not loaded yet"); }

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw ConfigError("port must be in [0, 65535]");
  if (max_upload_bytes == 0) throw ConfigError("max_upload_bytes must be positive");
  if (threads == 0) throw ConfigError("threads must be positive");
  if (classifier_weights.empty()) throw ConfigError("classifier_weights is required");
}

ServiceConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("service config must be a JSON object");
  ServiceConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "host") cfg.host = value.get<std::string>();
      else if (key == "port") cfg.port = value.get<int>();
      else if (key == "classifier_weights") cfg.classifier_weights = value.get<std::string>();
      else if (key == "classifier_spec") cfg.classifier_spec = value.get<std::string>();
      else if (key == "generator_weights") cfg.generator_weights = value.get<std::string>();
      else if (key == "generator_spec") cfg.generator_spec = value.get<std::string>();
      else if (key == "max_upload_bytes") cfg.max_upload_bytes = value.get<std::size_t>();
      else if (key == "model_version") cfg.model_version = value.get<std::string>();
      else if (key == "cors_origins") cfg.cors_origins = value.get<std::vector<std::string>>();
      else if (key == "threads") cfg.threads = value.get<std::size_t>();
      else throw ConfigError("unknown service config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("service config key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

json to_json(const ServiceConfig& cfg) {
  return {{"host", cfg.host},
          {"port", cfg.port},
          {"classifier_weights", cfg.classifier_weights.string()},
          {"classifier_spec", cfg.classifier_spec.string()},
          {"generator_weights", cfg.generator_weights.string()},
          {"generator_spec", cfg.generator_spec.string()},
          {"max_upload_bytes", cfg.max_upload_bytes},
          {"model_version", cfg.model_version},
          {"cors_origins", cfg.cors_origins},
          {"threads", cfg.threads}};
}

ServiceConfig load_config(const std::filesystem::path& path) {
  const auto bytes = model::read_file(path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  ServiceConfig cfg = config_from_json(j);
  // Relative model paths are relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.classifier_weights, &cfg.classifier_spec, &cfg.generator_weights, &cfg.generator_spec}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  return cfg;
}

void apply_env(ServiceConfig& cfg) {
  auto get = [](const char* name) -> const char* {
    const char* v = std::getenv(name);
    return v && *v ? v : nullptr;
  };
  auto number = [](const char* name, const char* text) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text, &end, 10);
    if (*end != '\0') throw ConfigError(std::string(name) + " is not a number: " + text);
    return v;
  };
  if (const char* v = get("E2EMD_HOST")) cfg.host = v;
  if (const char* v = get("E2EMD_PORT")) cfg.port = static_cast<int>(number("E2EMD_PORT", v));
  if (const char* v = get("E2EMD_WEIGHTS")) cfg.classifier_weights = v;
  if (const char* v = get("E2EMD_GEN_WEIGHTS")) cfg.generator_weights = v;
  if (const char* v = get("E2EMD_MAX_UPLOAD")) cfg.max_upload_bytes = number("E2EMD_MAX_UPLOAD", v);
}

std::shared_ptr<const Models> load_models(const ServiceConfig& cfg) {
  cfg.validate();
  auto m = std::make_shared<Models>();
  const auto spec_path = cfg.classifier_spec.empty() ? model::spec_path_for(cfg.classifier_weights) : cfg.classifier_spec;
  m->spec = model::load_spec(spec_path);
  m->weights = model::load_weights(cfg.classifier_weights);
  nn::check_weights(m->spec.network, m->weights);
  m->model_version = cfg.model_version.empty() ? m->spec.version : cfg.model_version;
  m->sparsity = model::prunable_sparsity(m->weights);
  if (!cfg.generator_weights.empty()) {
    const auto gen_spec =
        cfg.generator_spec.empty() ? model::spec_path_for(cfg.generator_weights) : cfg.generator_spec;
    Generator g{pointcloud::load_generator_spec(gen_spec), model::load_weights(cfg.generator_weights)};
    nn::check_weights(g.spec.combined(), g.weights);
    m->generator = std::move(g);
  }
  return m;
}

Reply error_reply(int status, const std::string& code, const std::string& message) {
  return {status, "application/json", json{{"code", code}, {"error", message}}.dump()};
}

Reply diagnose(const Models* models, const std::string& png, std::size_t max_upload) {
  if (!models) return not_loaded();
  if (png.size() > max_upload) return too_large(png.size(), max_upload);
  try {
    const nn::Tensor image = data::preprocess_png(as_bytes(png), models->spec.network.input);
    const auto d = model::predict(models->spec, models->weights, image);
    return {200, "application/json", model::to_json(model::Diagnosis{d.label, d.confidence, models->model_version}).dump()};
  } catch (const ParseError& e) {
    return error_reply(400, "bad_image", e.what());
  }
}

Reply reconstruct(const Models* models, const std::string& png, const std::string& format, std::size_t max_upload) {
  if (!models) return not_loaded();
  if (!models->generator) return error_reply(503, "generator_not_loaded", "no generator weights are configured");
  if (format != "obj" && format != "pcd") {
    return error_reply(400, "bad_format", "format must be obj or pcd, got '" + format + "'");
  }
  if (png.size() > max_upload) return too_large(png.size(), max_upload);
  const auto& g = *models->generator;
  nn::Tensor image;
  try {
    image = data::preprocess_png(as_bytes(png), g.spec.encoder.input);
  } catch (const ParseError& e) {
    return error_reply(400, "bad_image", e.what());
  }
  try {
    const auto pc = pointcloud::generate(g.spec, g.weights, image);
    return {200, "text/plain", format == "obj" ? pointcloud::write_obj(pc) : pointcloud::write_pcd(pc)};
  } catch (const DataError& e) {
    return error_reply(500, "reconstruction_failed", e.what());
  }
}

Reply model_info(const Models* models) {
  if (!models) return not_loaded();
  const json body{{"model_version", models->model_version},
                  {"input", models->spec.network.input},
                  {"classes", models->spec.classes},
                  {"sparsity", models->sparsity},
                  {"generator", models->generator.has_value()}};
  return {200, "application/json", body.dump()};
}

Reply health(const Models* models) {
  if (!models) return not_loaded();
  return {200, "text/plain", "ok"};
}

Service::Service(ServiceConfig cfg) : cfg_(std::move(cfg)), server_(std::make_unique<httplib::Server>()) {
  if (cfg_.port < 0 || cfg_.port > 65535) throw ConfigError("port must be in [0, 65535]");
  routes();
}

Service::~Service() { stop(); }

std::shared_ptr<const Models> Service::current() const {
  std::lock_guard lock(mutex_);
  return models_;
}

void Service::install(std::shared_ptr<const Models> models) {
  std::lock_guard lock(mutex_);
  models_ = std::move(models);
}

void Service::load() { install(load_models(cfg_)); }

int Service::bind() {
  if (cfg_.port == 0) {
    port_ = server_->bind_to_any_port(cfg_.host);
  } else {
    port_ = server_->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1;
  }
  if (port_ < 0) throw Error("io_error", "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  return port_;
}

void Service::listen() {
  if (port_ < 0) throw ConfigError("listen() before bind()");
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
}

void Service::routes() {
  auto& s = *server_;
  const std::size_t threads = cfg_.threads;
  s.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  s.set_payload_max_length(cfg_.max_upload_bytes + kMultipartSlack);

  const auto origins = cfg_.cors_origins;
  auto cors = [origins](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (origin.empty()) return;
    for (const auto& allowed : origins) {
      if (allowed == "*" || allowed == origin) {
        res.set_header("Access-Control-Allow-Origin", allowed == "*" ? "*" : origin);
        res.set_header("Vary", "Origin");
        return;
      }
    }
  };
  auto send = [cors](const httplib::Request& req, httplib::Response& res, const Reply& r) {
    cors(req, res);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  // The uploaded image: the first multipart file part, else the raw body.
  auto upload = [](const httplib::Request& req) -> const std::string& {
    if (req.is_multipart_form_data()) {
      if (req.has_file("image")) return req.files.find("image")->second.content;
      if (!req.files.empty()) return req.files.begin()->second.content;
    }
    return req.body;
  };

  s.set_error_handler([cors](const httplib::Request& req, httplib::Response& res) {
    cors(req, res);
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const Reply r = res.status == 413   ? error_reply(413, "payload_too_large", "upload exceeds the size limit")
                    : res.status == 404 ? error_reply(404, "not_found", "no route for " + req.method + " " + req.path)
                                        : error_reply(res.status, "http_error", httplib::status_message(res.status));
    res.set_content(r.body, r.content_type);
    return httplib::Server::HandlerResponse::Handled;
  });
  s.set_exception_handler([send](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send(req, res, error_reply(500, e.code(), e.what()));
    } catch (const std::exception& e) {
      send(req, res, error_reply(500, "internal_error", e.what()));
    }
  });

  s.Options(R"(/.*)", [cors](const httplib::Request& req, httplib::Response& res) {
    cors(req, res);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  s.Get("/healthz", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(req, res, health(current().get()));
  });
  s.Get("/api/model", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(req, res, model_info(current().get()));
  });
  const std::size_t limit = cfg_.max_upload_bytes;
  s.Post("/api/diagnose", [this, send, upload, limit](const httplib::Request& req, httplib::Response& res) {
    const auto models = current();
    send(req, res, diagnose(models.get(), upload(req), limit));
  });
  s.Post("/api/reconstruct", [this, send, upload, limit](const httplib::Request& req, httplib::Response& res) {
    const auto models = current();
    const std::string format = req.has_param("format") ? req.get_param_value("format") : "obj";
    send(req, res, reconstruct(models.get(), upload(req), format, limit));
  });
}

}  // namespace e2emd::service
