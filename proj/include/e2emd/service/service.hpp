#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "e2emd/model/model_spec.hpp"
#include "e2emd/pointcloud/generator.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace e2emd::service {

inline constexpr std::size_t kDefaultMaxUpload = 5 * 1024 * 1024;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path classifier_weights;
  std::filesystem::path classifier_spec;  // empty: next to the weights
  std::filesystem::path generator_weights;  // optional
  std::filesystem::path generator_spec;
  std::size_t max_upload_bytes = kDefaultMaxUpload;
  std::string model_version;  // empty: the classifier spec's version
  std::vector<std::string> cors_origins;  // "*" allows any origin
  std::size_t threads = 8;

  void validate() const;
};

// Unknown keys are rejected so that typos do not silently fall back.
ServiceConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ServiceConfig& cfg);
ServiceConfig load_config(const std::filesystem::path& path);

// E2EMD_HOST, E2EMD_PORT, E2EMD_WEIGHTS, E2EMD_GEN_WEIGHTS, E2EMD_MAX_UPLOAD.
void apply_env(ServiceConfig& cfg);

struct Generator {
  pointcloud::GeneratorSpec spec;
  nn::WeightStore weights;
};

// Everything the handlers read. Built once, then shared read-only.
struct Models {
  model::ModelSpec spec;
  nn::WeightStore weights;
  std::string model_version;
  double sparsity = 0;
  std::optional<Generator> generator;
};

// Parses every configured file; throws before anything is served.
std::shared_ptr<const Models> load_models(const ServiceConfig& cfg);

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Error body: {"code": ..., "error": ...}.
Reply error_reply(int status, const std::string& code, const std::string& message);

// Transport-free handlers; the HTTP layer only extracts the upload bytes.
Reply diagnose(const Models* models, const std::string& png, std::size_t max_upload);
Reply reconstruct(const Models* models, const std::string& png, const std::string& format, std::size_t max_upload);
Reply model_info(const Models* models);
Reply health(const Models* models);

class Service {
 public:
  explicit Service(ServiceConfig cfg);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind();
  // Serves until stop(); call after bind(), typically on its own thread.
  void listen();
  void stop();

  // Loads the configured models and starts answering. Until then the model
  // endpoints answer 503.
  void load();
  void install(std::shared_ptr<const Models> models);

  const ServiceConfig& config() const { return cfg_; }

 private:
  void routes();
  std::shared_ptr<const Models> current() const;

  ServiceConfig cfg_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Models> models_;
  int port_ = -1;
};

}  // namespace e2emd::service
