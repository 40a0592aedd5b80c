#pragma once

// Line-oriented `.arch` architecture documents. Grammar and examples: docs/arch_format.md.

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "pisim/netarch/network.hpp"

namespace pisim::netarch {

namespace detail {

struct Attr {
  std::string value;
  std::size_t column = 0;
};

class StatementReader {
 public:
  StatementReader(std::size_t line, std::size_t keyword_col, std::map<std::string, Attr> attrs)
      : line_(line), keyword_col_(keyword_col), attrs_(std::move(attrs)) {}

  int integer(const std::string& key) {
    auto it = attrs_.find(key);
    if (it == attrs_.end()) throw ParseError("missing attribute '" + key + "'", line_, keyword_col_);
    used_.insert(key);
    return to_int(it->second);
  }
  int integer(const std::string& key, int fallback) { return attrs_.count(key) ? integer(key) : fallback; }

  std::string text(const std::string& key) {
    auto it = attrs_.find(key);
    if (it == attrs_.end()) throw ParseError("missing attribute '" + key + "'", line_, keyword_col_);
    used_.insert(key);
    return it->second.value;
  }
  bool has(const std::string& key) const { return attrs_.count(key) != 0; }
  std::size_t column_of(const std::string& key) const {
    auto it = attrs_.find(key);
    return it == attrs_.end() ? keyword_col_ : it->second.column;
  }

  void reject_unused() const {
    for (const auto& [k, a] : attrs_)
      if (!used_.count(k)) throw ParseError("unknown attribute '" + k + "'", line_, a.column);
  }

  std::size_t line() const { return line_; }

  int to_int(const Attr& a) const {
    int v = 0;
    const auto* b = a.value.data();
    const auto* e = b + a.value.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e) throw ParseError("expected an integer, got '" + a.value + "'", line_, a.column);
    return v;
  }

 private:
  std::size_t line_;
  std::size_t keyword_col_;
  std::map<std::string, Attr> attrs_;
  std::set<std::string> used_;
};

}  // namespace detail

inline NetworkArch parse_arch(std::string_view text) {
  NetworkArch arch;
  bool have_network = false;
  bool have_input = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::size_t last_line = 1;

  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    start = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    // tokenize on blanks, remembering 1-based columns
    std::vector<std::pair<std::string, std::size_t>> toks;
    for (std::size_t i = 0; i < line.size();) {
      if (line[i] == ' ' || line[i] == '\t') {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      toks.emplace_back(std::string(line.substr(i, j - i)), i + 1);
      i = j;
    }
    if (toks.empty()) continue;
    last_line = line_no;

    const auto& [keyword, kcol] = toks.front();
    std::map<std::string, detail::Attr> attrs;
    for (std::size_t t = 1; t < toks.size(); ++t) {
      const auto& [tok, col] = toks[t];
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == tok.size())
        throw ParseError("expected key=value, got '" + tok + "'", line_no, col);
      const auto key = tok.substr(0, eq);
      if (attrs.count(key)) throw ParseError("duplicate attribute '" + key + "'", line_no, col);
      attrs[key] = {tok.substr(eq + 1), col + eq + 1};
    }
    detail::StatementReader r(line_no, kcol, std::move(attrs));

    if (keyword == "network") {
      if (have_network) throw ParseError("duplicate 'network' statement", line_no, kcol);
      arch.name = r.text("name");
      have_network = true;
    } else if (keyword == "input") {
      if (have_input) throw ParseError("duplicate 'input' statement", line_no, kcol);
      arch.input.name = r.text("name");
      arch.input.channels = r.integer("channels");
      arch.input.height = r.integer("height");
      arch.input.width = r.integer("width");
      arch.input.classes = r.integer("classes");
      have_input = true;
    } else if (keyword == "conv") {
      const int k = r.integer("kernel");
      auto l = LayerSpec::make_conv(r.integer("in"), r.integer("out"), k, r.integer("stride", 1),
                                    r.integer("padding", k / 2), r.integer("bias", 1) != 0);
      arch.layers.push_back(l);
    } else if (keyword == "fc") {
      arch.layers.push_back(LayerSpec::make_fc(r.integer("in"), r.integer("out"), r.integer("bias", 1) != 0));
    } else if (keyword == "relu") {
      arch.layers.push_back(LayerSpec::make_relu());
    } else if (keyword == "flatten") {
      arch.layers.push_back(LayerSpec::make_flatten());
    } else if (keyword == "avgpool") {
      if (r.integer("global", 0) != 0) {
        arch.layers.push_back(LayerSpec::make_global_avgpool());
      } else {
        const int wnd = r.integer("window");
        arch.layers.push_back(LayerSpec::make_avgpool(wnd, r.integer("stride", wnd)));
      }
    } else if (keyword == "skip") {
      SkipConnection s;
      const auto from = r.text("from");
      s.source = from == "input" ? -1 : r.integer("from");
      s.merge = r.integer("to");
      const auto mode = r.has("mode") ? r.text("mode") : std::string("identity");
      if (mode == "identity") {
        s.mode = SkipMode::Identity;
      } else if (mode == "pad") {
        s.mode = SkipMode::Pad;
      } else if (mode == "conv") {
        s.mode = SkipMode::Conv;
        s.projection = ConvSpec{r.integer("in"), r.integer("out"), r.integer("kernel", 1), r.integer("stride", 1),
                                r.integer("padding", 0), r.integer("bias", 1) != 0};
      } else {
        throw ParseError("unknown skip mode '" + mode + "'", line_no, r.column_of("mode"));
      }
      arch.skip_connections.push_back(s);
    } else {
      throw ParseError("unknown statement '" + keyword + "'", line_no, kcol);
    }
    r.reject_unused();
  }

  if (!have_network) throw ParseError("document has no 'network' statement", last_line, 1);
  if (!have_input) throw ParseError("document has no 'input' statement", last_line, 1);
  if (arch.layers.empty()) throw ParseError("document declares no layers", last_line, 1);
  validate(arch);
  return arch;
}

inline std::string serialize_arch(const NetworkArch& a) {
  std::ostringstream os;
  os << "network name=" << a.name << "\n";
  os << "input name=" << a.input.name << " channels=" << a.input.channels << " height=" << a.input.height
     << " width=" << a.input.width << " classes=" << a.input.classes << "\n";
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& l = a.layers[i];
    switch (l.kind) {
      case LayerKind::Conv:
        os << "conv in=" << l.conv.in_channels << " out=" << l.conv.out_channels << " kernel=" << l.conv.kernel_size
           << " stride=" << l.conv.stride << " padding=" << l.conv.padding << " bias=" << (l.conv.bias ? 1 : 0);
        break;
      case LayerKind::FC:
        os << "fc in=" << l.fc.in_features << " out=" << l.fc.out_features << " bias=" << (l.fc.bias ? 1 : 0);
        break;
      case LayerKind::ReLU: os << "relu"; break;
      case LayerKind::Flatten: os << "flatten"; break;
      case LayerKind::AvgPool:
        if (l.pool.global())
          os << "avgpool global=1";
        else
          os << "avgpool window=" << l.pool.window << " stride=" << l.pool.stride;
        break;
    }
    os << "  # " << i << "\n";
    for (const auto& s : a.skip_connections) {
      if (s.merge != static_cast<int>(i)) continue;
      os << "skip from=" << (s.source < 0 ? std::string("input") : std::to_string(s.source)) << " to=" << s.merge
         << " mode=" << to_string(s.mode);
      if (s.mode == SkipMode::Conv) {
        const auto& p = *s.projection;
        os << " in=" << p.in_channels << " out=" << p.out_channels << " kernel=" << p.kernel_size
           << " stride=" << p.stride << " padding=" << p.padding << " bias=" << (p.bias ? 1 : 0);
      }
      os << "\n";
    }
  }
  return os.str();
}

inline NetworkArch load_arch(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open architecture file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_arch(ss.str());
}

}  // namespace pisim::netarch
