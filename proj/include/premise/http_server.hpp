#pragma once

#include <memory>
#include <string>
#include <utility>

#include "premise/service.hpp"

namespace premise {

inline constexpr const char* kServerAddrEnv = "PREMISE_SERVER_ADDR";
inline constexpr const char* kDefaultServerAddr = "127.0.0.1:8080";

// "host:port" split; throws Error(malformed_request) on a bad address.
std::pair<std::string, int> parse_address(const std::string& addr);

// Explicit address, else the environment variable, else the default.
std::string resolve_address(const std::string& explicit_addr);

// POST /retrieve, GET /health and POST /snapshots over a PremiseService.
class HttpServer {
 public:
  explicit HttpServer(PremiseService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Minimal blocking client for the same protocol.
class RetrieveClient {
 public:
  RetrieveClient(std::string host, int port);

  RetrieveResponse retrieve(const RetrieveRequest& request) const;
  // Raw exchange: (status, body).
  std::pair<int, std::string> post(const std::string& path, const std::string& body) const;
  std::pair<int, std::string> get(const std::string& path) const;
  std::string upload_snapshot(const std::string& corpus_jsonl) const;

 private:
  std::string host_;
  int port_;
};

}  // namespace premise
