#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace worldmesh {

// Thin synchronous transports shared by all external adapters. Failures raise
// Error{kAdapterFailure}.

// POST `body` to an http:// URL and return the response body (2xx only).
std::string http_post(const std::string& url, const std::string& content_type, const std::string& body,
                      int timeout_seconds = 600);

// Run a shell command with `stdin_data` on standard input and capture stdout.
std::string run_command(const std::string& command, const std::string& stdin_data);

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws Error{kAdapterFailure} on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace worldmesh
