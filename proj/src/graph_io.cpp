#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "iaip/error.hpp"
#include "iaip/ising_graph.hpp"
#include "text_util.hpp"

namespace iaip::graph {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// RFC 4180 style split of one record (no embedded newlines).
std::vector<std::string> csv_record(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  for (;;) {
    cur.clear();
    if (i < line.size() && line[i] == '"') {
      ++i;
      for (;;) {
        if (i >= line.size()) fail(ErrorCode::Parse, "edge csv line " + std::to_string(lineno) + ": unterminated quote");
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cur += '"';
            i += 2;
            continue;
          }
          ++i;
          break;
        }
        cur += line[i++];
      }
      if (i < line.size() && line[i] != ',')
        fail(ErrorCode::Parse, "edge csv line " + std::to_string(lineno) + ": text after closing quote");
    } else {
      while (i < line.size() && line[i] != ',') cur += line[i++];
    }
    out.push_back(cur);
    if (i >= line.size()) return out;
    ++i;  // comma
  }
}

std::vector<std::pair<std::size_t, std::size_t>> upper_edges(const IsingGraph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t j = 0; j < g.size(); ++j)
    for (std::size_t k = j + 1; k < g.size(); ++k)
      if (g.weight(j, k) != 0.0) e.emplace_back(j, k);
  return e;
}

constexpr std::string_view kDocMagic = "iaip-graph 1";

}  // namespace

std::string export_graph(const IsingGraph& g, ExportFormat format) {
  std::string out;
  const auto edges = upper_edges(g);
  switch (format) {
    case ExportFormat::GraphML: {
      out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
      out += "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
      out += "  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n";
      out += "  <key id=\"threshold\" for=\"node\" attr.name=\"threshold\" attr.type=\"double\"/>\n";
      out += "  <key id=\"lambda\" for=\"node\" attr.name=\"lambda\" attr.type=\"double\"/>\n";
      out += "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n";
      out += "  <graph id=\"ising\" edgedefault=\"undirected\">\n";
      for (std::size_t j = 0; j < g.size(); ++j) {
        out += "    <node id=\"n" + std::to_string(j) + "\"><data key=\"name\">" + xml_escape(g.names()[j]) +
               "</data><data key=\"threshold\">" + detail::format_double(g.thresholds()[j]) +
               "</data><data key=\"lambda\">" + detail::format_double(g.lambdas()[j]) + "</data></node>\n";
      }
      for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [j, k] = edges[e];
        out += "    <edge id=\"e" + std::to_string(e) + "\" source=\"n" + std::to_string(j) + "\" target=\"n" +
               std::to_string(k) + "\"><data key=\"weight\">" + detail::format_double(g.weight(j, k)) +
               "</data></edge>\n";
      }
      out += "  </graph>\n</graphml>\n";
      break;
    }
    case ExportFormat::Dot: {
      out += "graph ising {\n";
      for (std::size_t j = 0; j < g.size(); ++j)
        out += "  " + dot_quote(g.names()[j]) + " [threshold=" + detail::format_double(g.thresholds()[j]) + "];\n";
      for (auto [j, k] : edges) {
        const std::string w = detail::format_double(g.weight(j, k));
        out += "  " + dot_quote(g.names()[j]) + " -- " + dot_quote(g.names()[k]) + " [weight=" + w +
               ", label=\"" + w + "\", color=\"" + (g.weight(j, k) > 0.0 ? "green" : "red") + "\"];\n";
      }
      out += "}\n";
      break;
    }
    case ExportFormat::EdgeCsv: {
      out += "source,target,weight\n";
      for (auto [j, k] : edges) {
        out += csv_field(g.names()[j]) + ',' + csv_field(g.names()[k]) + ',';
        detail::append_double(out, g.weight(j, k));
        out += '\n';
      }
      break;
    }
  }
  return out;
}

std::vector<double> import_edge_csv(std::string_view text, const std::vector<std::string>& names) {
  const std::size_t m = names.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < m; ++j) index.emplace(names[j], j);

  auto lines = detail::split_lines(text);
  if (lines.empty() || lines[0] != "source,target,weight")
    fail(ErrorCode::Parse, "edge csv: missing 'source,target,weight' header");
  std::vector<double> w(m * m, 0.0);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto rec = csv_record(lines[li], li + 1);
    if (rec.size() != 3)
      fail(ErrorCode::Parse, "edge csv line " + std::to_string(li + 1) + ": expected 3 fields");
    auto a = index.find(rec[0]), b = index.find(rec[1]);
    if (a == index.end() || b == index.end())
      fail(ErrorCode::InvalidArgument, "edge csv line " + std::to_string(li + 1) + ": unknown node '" +
                                           (a == index.end() ? rec[0] : rec[1]) + "'");
    if (a->second == b->second)
      fail(ErrorCode::InvalidArgument, "edge csv line " + std::to_string(li + 1) + ": self-loop");
    auto v = detail::parse_double(rec[2]);
    if (!v || !std::isfinite(*v))
      fail(ErrorCode::Parse, "edge csv line " + std::to_string(li + 1) + ": bad weight");
    const std::size_t j = a->second, k = b->second;
    if (w[j * m + k] != 0.0)
      fail(ErrorCode::InvalidArgument, "edge csv line " + std::to_string(li + 1) + ": duplicate edge");
    w[j * m + k] = *v;
    w[k * m + j] = *v;
  }
  return w;
}

std::string write_graph_document(const IsingGraph& g) {
  std::string out(kDocMagic);
  out += "\ngamma ";
  detail::append_double(out, g.gamma());
  out += "\nnodes " + std::to_string(g.size()) + '\n';
  for (std::size_t j = 0; j < g.size(); ++j) {
    const auto& name = g.names()[j];
    for (char c : name)
      if (detail::is_space(c) || c == '\n')
        fail(ErrorCode::InvalidArgument, "node name '" + name + "' contains whitespace");
    out += "node " + name + ' ';
    detail::append_double(out, g.thresholds()[j]);
    out += ' ';
    detail::append_double(out, g.lambdas()[j]);
    out += '\n';
  }
  const auto edges = upper_edges(g);
  out += "edges " + std::to_string(edges.size()) + '\n';
  for (auto [j, k] : edges) {
    out += "edge " + std::to_string(j) + ' ' + std::to_string(k) + ' ';
    detail::append_double(out, g.weight(j, k));
    out += '\n';
  }
  return out;
}

IsingGraph read_graph_document(std::string_view text) {
  auto lines = detail::split_lines(text);
  std::size_t li = 0;
  auto next = [&](std::string_view what) -> std::vector<std::string_view> {
    if (li >= lines.size()) fail(ErrorCode::Parse, "graph document: missing " + std::string(what) + " line");
    auto toks = detail::split_ws(lines[li++]);
    if (toks.empty() || toks[0] != what)
      fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": expected '" + std::string(what) + "'");
    return toks;
  };
  auto num = [&](std::string_view tok) {
    auto v = detail::parse_double(tok);
    if (!v) fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": bad number '" + std::string(tok) + "'");
    return *v;
  };
  auto count = [&](std::string_view tok, std::size_t limit) {
    auto v = detail::parse_int<std::size_t>(tok);
    if (!v || *v > limit)
      fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": bad count '" + std::string(tok) + "'");
    return *v;
  };

  if (lines.empty() || lines[0] != kDocMagic) fail(ErrorCode::Parse, "graph document: missing 'iaip-graph 1' header");
  li = 1;
  auto g = next("gamma");
  if (g.size() != 2) fail(ErrorCode::Parse, "graph document: malformed gamma line");
  const double gamma = num(g[1]);
  auto nn = next("nodes");
  if (nn.size() != 2) fail(ErrorCode::Parse, "graph document: malformed nodes line");
  const std::size_t m = count(nn[1], lines.size());
  if (m == 0) fail(ErrorCode::Shape, "graph document: no nodes");

  std::vector<std::string> names;
  std::vector<double> tau, lambdas;
  for (std::size_t j = 0; j < m; ++j) {
    auto t = next("node");
    if (t.size() != 4) fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": malformed node");
    names.emplace_back(t[1]);
    tau.push_back(num(t[2]));
    lambdas.push_back(num(t[3]));
  }
  auto ne = next("edges");
  if (ne.size() != 2) fail(ErrorCode::Parse, "graph document: malformed edges line");
  const std::size_t e = count(ne[1], lines.size());
  std::vector<double> w(m * m, 0.0);
  for (std::size_t i = 0; i < e; ++i) {
    auto t = next("edge");
    if (t.size() != 4) fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": malformed edge");
    const std::size_t j = count(t[1], m - 1), k = count(t[2], m - 1);
    if (j >= k) fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": edge must have j < k");
    const double v = num(t[3]);
    if (v == 0.0 || w[j * m + k] != 0.0)
      fail(ErrorCode::Parse, "graph document line " + std::to_string(li) + ": zero or duplicate edge");
    w[j * m + k] = w[k * m + j] = v;
  }
  for (; li < lines.size(); ++li)
    if (!lines[li].empty()) fail(ErrorCode::Parse, "graph document: trailing content");
  return IsingGraph(std::move(names), std::move(tau), std::move(w), gamma, std::move(lambdas));
}

std::string graph_digest(const IsingGraph& g) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(detail::fnv1a64(write_graph_document(g))));
  return buf;
}

std::string write_fit_diagnostics(const FittedGraph& f) {
  if (f.fits.size() != f.graph.size()) fail(ErrorCode::Shape, "diagnostics: one fit per node required");
  std::string out = "attribute,threshold,penalty,neighbours,ebic,loglik,path_index\n";
  for (std::size_t j = 0; j < f.fits.size(); ++j) {
    const auto& n = f.fits[j];
    out += csv_field(f.graph.names()[j]);
    out += ',';
    detail::append_double(out, n.threshold);
    out += ',';
    detail::append_double(out, n.penalty);
    out += ',' + std::to_string(f.graph.neighbours(j).size()) + ',';
    detail::append_double(out, n.ebic);
    out += ',';
    detail::append_double(out, n.loglik);
    out += ',' + std::to_string(n.path_index) + '\n';
  }
  return out;
}

}  // namespace iaip::graph
