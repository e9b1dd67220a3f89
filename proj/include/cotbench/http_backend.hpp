#pragma once

// OpenAI-compatible chat-completions over HTTP(S).

#include <string>

#include "cotbench/gateway.hpp"

namespace cotbench {

/// Request body for POST {base_url}/chat/completions. FilePath images are
/// read and inlined as data URIs.
Json encode_chat_request(const EndpointConfig& endpoint, const ChatRequest& request);

/// Parses a 2xx response body. Throws ProtocolError on malformed bodies.
ChatResponse decode_chat_response(const std::string& body);

/// "data:<media_type>;base64,<payload>" or the plain URL.
std::string image_url_for(const ImageRef& image);

struct ParsedUrl {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path_prefix;       // "/v1"
};

ParsedUrl parse_base_url(const std::string& base_url);

class HttpBackend final : public ChatBackend {
 public:
  ChatResponse send(const EndpointConfig& endpoint, const ChatRequest& request) override;
  /// Multi-sample requests are expanded by the gateway; not every
  /// OpenAI-compatible server honours n > 1.
  bool supports_multi_sample() const override { return false; }
};

}  // namespace cotbench
