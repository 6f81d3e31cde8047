#include "bregnext/mapping.hpp"

#include <charconv>
#include <cstdio>

namespace bnx {
namespace {

double parse_scalar(const std::string& text, const std::string& whole) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad mapping parameter in '" + whole + "'");
  return v;
}

}  // namespace

MappingKind MappingKind::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (head == "identity") return identity();
  if (head == "h1" || head == "arctan") return h1();
  if (head == "h2") return h2();
  if (head == "adaptive" || head == "breg") return adaptive();
  if (head == "lambda") {
    if (arg.empty()) throw ConfigError("lambda mapping needs a value, e.g. lambda:0.9");
    return lambda_scaled(parse_scalar(arg, text));
  }
  if (head == "h3") return h3(arg.empty() ? 1.0 : parse_scalar(arg, text));
  throw ConfigError("unknown mapping kind '" + text + "'");
}

std::string MappingKind::to_string() const {
  char buf[64];
  switch (tag_) {
    case Tag::Identity: return "identity";
    case Tag::H1Arctan: return "h1";
    case Tag::H2XArctanLog: return "h2";
    case Tag::Adaptive: return "adaptive";
    case Tag::LambdaScaled:
      std::snprintf(buf, sizeof buf, "lambda:%.17g", scalar_);
      return buf;
    case Tag::H3LogExp:
      std::snprintf(buf, sizeof buf, "h3:%.17g", scalar_);
      return buf;
  }
  return "identity";
}

double grad_path_product(std::span<const PathFactor> factors) {
  double p = 1.0;
  for (const auto& f : factors) p *= f.dF + f.dH;
  return p;
}

}  // namespace bnx
