#include "worldmesh/transport.hpp"

#include <httplib.h>
#include <openssl/evp.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>

#include "worldmesh/error.hpp"

namespace worldmesh {

std::string http_post(const std::string& url, const std::string& content_type, const std::string& body,
                      int timeout_seconds) {
  static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw Error(ErrorCode::kAdapterFailure, "unsupported endpoint url: " + url);
  httplib::Client client(m[1].str());
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  client.set_write_timeout(timeout_seconds);
  const std::string path = m[2].matched ? m[2].str() : "/";
  auto res = client.Post(path, body, content_type);
  if (!res) throw Error(ErrorCode::kAdapterFailure, "request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw Error(ErrorCode::kAdapterFailure, "endpoint " + url + " returned HTTP " + std::to_string(res->status));
  return res->body;
}

std::string run_command(const std::string& command, const std::string& stdin_data) {
  auto tmpl = (std::filesystem::temp_directory_path() / "worldmesh-stdin-XXXXXX").string();
  int fd = mkstemp(tmpl.data());
  if (fd < 0) throw Error(ErrorCode::kAdapterFailure, "cannot create temp file for command input");
  close(fd);
  {
    std::ofstream f(tmpl, std::ios::binary);
    f << stdin_data;
  }
  std::string out;
  FILE* pipe = popen(("( " + command + " ) < '" + tmpl + "'").c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(tmpl);
    throw Error(ErrorCode::kAdapterFailure, "cannot start command: " + command);
  }
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  int status = pclose(pipe);
  std::filesystem::remove(tmpl);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw Error(ErrorCode::kAdapterFailure, "command failed: " + command);
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::string clean;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw Error(ErrorCode::kAdapterFailure, "malformed base64 payload");
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw Error(ErrorCode::kAdapterFailure, "malformed base64 payload");
  std::size_t len = static_cast<std::size_t>(n);
  if (!clean.empty() && clean.back() == '=') --len;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

}  // namespace worldmesh
