#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>

namespace finrag::http {

struct HttpResult {
    int status = 0;          // 0 = transport-level failure (no response)
    std::string body;
    std::string error;       // set when status == 0
};

/// Minimal POST transport. Injectable so tests can fault-inject statuses and
/// assert that offline backends never touch the network.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResult post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

/// cpp-httplib backed transport.
std::shared_ptr<HttpTransport> make_default_transport(int timeout_seconds = 60);

struct ParsedUrl {
    std::string scheme;
    std::string host_port;  // "host" or "host:port"
    std::string path;       // "/v1/chat/completions"
};

ParsedUrl parse_url(const std::string& url);

bool is_retryable_status(int status);

}  // namespace finrag::http
