#pragma once

#include <memory>

#include "sqg/config.hpp"
#include "sqg/feedback.hpp"
#include "sqg/gateway.hpp"

namespace sqg {

// HTTP front end: gateway, rule staging, analytics and review endpoints.
class Service {
 public:
  // Loads the model and rule files named in the config when they exist.
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds (port 0 picks a free port), serves on a background thread and
  // returns the bound port. Throws kInvalidConfig when binding fails.
  int start();
  void stop();
  // Serves on the configured address until stop() is called from elsewhere.
  void run();

  Gateway& gateway();
  ReviewStore& reviews();
  const ServiceConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sqg
