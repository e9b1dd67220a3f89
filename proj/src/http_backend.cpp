#include "cotbench/http_backend.hpp"

#include <chrono>
#include <cstdlib>

#include "cotbench/util.hpp"
#include "httplib.h"

namespace cotbench {

namespace {

std::string guess_media_type(const std::string& path) {
  const auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "png") return "image/png";
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  return "application/octet-stream";
}

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 300;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

}  // namespace

std::string image_url_for(const ImageRef& image) {
  switch (image.kind) {
    case ImageKind::Url:
      return image.value;
    case ImageKind::InlineBase64:
      return "data:" + image.media_type + ";base64," + image.value;
    case ImageKind::FilePath: {
      const auto media =
          image.media_type.empty() ? guess_media_type(image.value) : image.media_type;
      return "data:" + media + ";base64," + base64_encode(read_file(image.value));
    }
  }
  return image.value;
}

Json encode_chat_request(const EndpointConfig& endpoint, const ChatRequest& request) {
  Json body;
  body["model"] = endpoint.model_id;
  Json messages = Json::array();
  if (request.system) {
    Json sys;
    sys["role"] = "system";
    sys["content"] = *request.system;
    messages.push_back(std::move(sys));
  }
  for (const auto& m : request.messages) {
    Json msg;
    msg["role"] = m.role;
    Json content = Json::array();
    for (const auto& part : m.parts) {
      Json p;
      if (part.is_image()) {
        p["type"] = "image_url";
        p["image_url"]["url"] = image_url_for(*part.image);
      } else {
        p["type"] = "text";
        p["text"] = part.text;
      }
      content.push_back(std::move(p));
    }
    msg["content"] = std::move(content);
    messages.push_back(std::move(msg));
  }
  body["messages"] = std::move(messages);
  body["max_tokens"] = request.max_tokens;
  body["temperature"] = request.temperature;
  if (request.n != 1) body["n"] = request.n;
  if (request.response_schema && endpoint.supports_response_schema) {
    body["response_format"] = Json::parse(*request.response_schema);
  }
  if (request.logprobs) body["logprobs"] = true;
  return body;
}

ChatResponse decode_chat_response(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw ProtocolError(200, excerpt(body), std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array()) {
    throw ProtocolError(200, excerpt(body), "response has no choices array");
  }
  ChatResponse out;
  out.request_id = j.value("id", "");
  out.model_id = j.value("model", "");
  for (const auto& choice : j["choices"]) {
    Candidate c;
    if (choice.contains("message") && choice["message"].contains("content") &&
        choice["message"]["content"].is_string()) {
      c.text = choice["message"]["content"].get<std::string>();
    }
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      double sum = 0.0;
      int count = 0;
      for (const auto& tok : choice["logprobs"]["content"]) {
        if (tok.contains("logprob") && tok["logprob"].is_number()) {
          sum += tok["logprob"].get<double>();
          ++count;
        }
      }
      if (count > 0) {
        c.logprob_sum = sum;
        c.token_count = count;
      }
    }
    out.candidates.push_back(std::move(c));
  }
  if (out.candidates.empty()) throw ProtocolError(200, excerpt(body), "response has no choices");
  return out;
}

ParsedUrl parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base_url has no scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = base_url;
  } else {
    out.scheme_host_port = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  return out;
}

ChatResponse HttpBackend::send(const EndpointConfig& endpoint, const ChatRequest& request) {
  const auto url = parse_base_url(endpoint.base_url);
  httplib::Client client(url.scheme_host_port);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout).count();
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout).count() % 1000000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (!key) throw ConfigError("environment variable " + endpoint.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const auto started = std::chrono::steady_clock::now();
  const auto body = encode_chat_request(endpoint, request).dump();
  auto result = client.Post(url.path_prefix + "/chat/completions", headers, body,
                            "application/json");
  if (!result) {
    throw TransientError(0, "request to " + endpoint.base_url +
                                " failed: " + httplib::to_string(result.error()));
  }
  const int status = result->status;
  if (status == 429 || status >= 500) {
    throw TransientError(status, "HTTP " + std::to_string(status) + " from " + endpoint.base_url);
  }
  if (status < 200 || status >= 300) {
    throw ProtocolError(status, excerpt(result->body),
                        "HTTP " + std::to_string(status) + " from " + endpoint.base_url + ": " +
                            excerpt(result->body));
  }
  auto response = decode_chat_response(result->body);
  response.latency = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - started);
  if (response.model_id.empty()) response.model_id = endpoint.model_id;
  return response;
}

}  // namespace cotbench
