#include "premise/http_server.hpp"

#include <cstdlib>

#define CPPHTTPLIB_LISTEN_BACKLOG 256
#include <httplib.h>

namespace premise {

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, const std::pair<int, std::string>& out) {
  res.status = out.first;
  res.set_content(out.second, kJson);
}

}  // namespace

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
    throw Error(ErrorCode::malformed_request, "address must be host:port, got '" + addr + "'");
  const std::string port_text = addr.substr(colon + 1);
  char* end = nullptr;
  const long port = std::strtol(port_text.c_str(), &end, 10);
  if (*end != '\0' || port < 0 || port > 65535)
    throw Error(ErrorCode::malformed_request, "invalid port '" + port_text + "'");
  return {addr.substr(0, colon), static_cast<int>(port)};
}

std::string resolve_address(const std::string& explicit_addr) {
  if (!explicit_addr.empty()) return explicit_addr;
  if (const char* env = std::getenv(kServerAddrEnv); env != nullptr && *env != '\0') return env;
  return kDefaultServerAddr;
}

struct HttpServer::Impl {
  explicit Impl(PremiseService& s) : service(s) {}
  PremiseService& service;
  httplib::Server server;
};

HttpServer::HttpServer(PremiseService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  PremiseService& svc = impl_->service;
  const auto& limits = svc.options().limits;
  srv.set_payload_max_length(std::max(limits.max_body_bytes, limits.max_upload_bytes) + 1);

  srv.Post("/retrieve", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.handle_retrieve_body(req.body));
  });
  srv.Post("/snapshots", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.handle_snapshot_upload(req.body));
  });
  srv.Get("/health", [&svc](const httplib::Request&, httplib::Response& res) {
    res.set_content(svc.health().dump(), kJson);
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", "internal"}, {"detail", detail}}.dump(), kJson);
  });
  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const ErrorCode code = res.status == 413 ? ErrorCode::request_too_large : ErrorCode::malformed_request;
    const std::string name = res.status == 404 ? "not_found" : std::string(to_string(code));
    res.set_content(nlohmann::json{{"error", name}, {"detail", "HTTP " + std::to_string(res.status)}}.dump(), kJson);
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

RetrieveClient::RetrieveClient(std::string host, int port) : host_(std::move(host)), port_(port) {}

std::pair<int, std::string> RetrieveClient::post(const std::string& path, const std::string& body) const {
  httplib::Client cli(host_, port_);
  cli.set_read_timeout(120, 0);
  auto res = cli.Post(path, body, kJson);
  if (!res) throw Error(ErrorCode::io_error, "request to " + host_ + ":" + std::to_string(port_) + " failed: " +
                                                 httplib::to_string(res.error()));
  return {res->status, res->body};
}

std::pair<int, std::string> RetrieveClient::get(const std::string& path) const {
  httplib::Client cli(host_, port_);
  auto res = cli.Get(path);
  if (!res) throw Error(ErrorCode::io_error, "request to " + host_ + ":" + std::to_string(port_) + " failed");
  return {res->status, res->body};
}

namespace {

[[noreturn]] void raise_remote(int status, const std::string& body) {
  std::string code = "io_error";
  std::string detail = body;
  try {
    const auto j = nlohmann::json::parse(body);
    code = j.at("error").get<std::string>();
    detail = j.at("detail").get<std::string>();
  } catch (const std::exception&) {
  }
  ErrorCode ec = ErrorCode::io_error;
  if (code == "unknown_snapshot") ec = ErrorCode::unknown_snapshot;
  else if (code == "malformed_request") ec = ErrorCode::malformed_request;
  else if (code == "request_too_large") ec = ErrorCode::request_too_large;
  else if (code == "unknown_premise") ec = ErrorCode::unknown_name;
  else if (code == "conflicting_duplicate") ec = ErrorCode::conflicting_duplicate;
  throw Error(ec, "server returned " + std::to_string(status) + " " + code + ": " + detail);
}

}  // namespace

RetrieveResponse RetrieveClient::retrieve(const RetrieveRequest& request) const {
  const auto [status, body] = post("/retrieve", to_json(request).dump());
  if (status != 200) raise_remote(status, body);
  return parse_retrieve_response(nlohmann::json::parse(body));
}

std::string RetrieveClient::upload_snapshot(const std::string& corpus_jsonl) const {
  const auto [status, body] = post("/snapshots", corpus_jsonl);
  if (status != 200) raise_remote(status, body);
  return nlohmann::json::parse(body).at("snapshot_id").get<std::string>();
}

}  // namespace premise
