#include <ppf/algebra.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace ppf {

ParseError::ParseError(std::size_t line, std::string field, const std::string &message)
    : std::runtime_error("line " + std::to_string(line) + (field.empty() ? "" : " (" + field + ")") + ": " + message)
    , line(line), field(std::move(field))
{ }

namespace {

bool needs_quotes(std::string_view v)
{
    if (v.empty())
        return true;
    for (char c : v)
        if (std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '#' || c == '\\')
            return true;
    return v == "<-";
}

std::string quote(std::string_view v)
{
    if (!needs_quotes(v))
        return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    out += '"';
    return out;
}

/// Splits a line on whitespace, honoring double quotes inside `name="..."` tokens; `#` starts a comment.
std::vector<std::string> tokenize(std::string_view line, std::size_t lineno)
{
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
            ++i;
        if (i >= line.size() || line[i] == '#')
            break;
        std::string tok;
        bool quoted = false;
        while (i < line.size() && (quoted || !std::isspace(static_cast<unsigned char>(line[i])))) {
            char c = line[i++];
            if (c == '"') {
                quoted = !quoted;
                continue;
            }
            if (quoted && c == '\\' && i < line.size()) {
                tok += line[i++];
                continue;
            }
            tok += c;
        }
        if (quoted)
            throw ParseError(lineno, "", "unterminated quote");
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

NodeId parse_id(const std::string &tok, std::size_t lineno, const char *field)
{
    if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
        throw ParseError(lineno, field, "expected a non-negative integer id, got '" + tok + "'");
    try {
        return std::stoll(tok);
    } catch (const std::exception &) {
        throw ParseError(lineno, field, "id out of range: '" + tok + "'");
    }
}

void check_required_params(const OperatorInstance &op, std::size_t lineno)
{
    for (auto name : op.kind().required_params)
        if (!op.param(name))
            throw ParseError(lineno, std::string(name),
                             std::string(op.kind().name) + " requires parameter '" + std::string(name) + "'");
}

void finish(Plan &plan, const PlanParseOptions &opts, std::size_t lineno)
{
    if (opts.require_roots && plan.roots.empty())
        throw ParseError(lineno, "ROOT", "no roots");
    for (NodeId r : plan.roots)
        if (!plan.contains(r))
            throw ParseError(lineno, "ROOT", "root " + std::to_string(r) + " is not a node");
    for (const auto &[id, node] : plan.nodes)
        for (NodeId c : node.children)
            if (c != kNoNode && !plan.contains(c))
                throw ParseError(lineno, "children", "node " + std::to_string(id) + " references unknown child " +
                                                         std::to_string(c));
}

}

std::string write_plan(const Plan &plan)
{
    std::ostringstream out;
    for (const auto &[id, node] : plan.nodes) {
        if (node.is_leaf()) {
            out << "LEAF " << id << ' ' << quote(node.leaf().collection);
            if (node.leaf().kind)
                out << ' ' << to_string(*node.leaf().kind);
            out << '\n';
            continue;
        }
        const auto &op = node.op();
        out << id << ' ' << op.kind().name;
        for (const auto &[name, p] : op.params)
            out << ' ' << name << '=' << quote(p.value);
        out << " <-";
        for (NodeId c : node.children) {
            out << ' ';
            if (c == kNoNode)
                out << '_';
            else
                out << c;
        }
        out << '\n';
    }
    for (NodeId r : plan.roots)
        out << "ROOT " << r << '\n';
    return out.str();
}

std::string serialize_plan(const Plan &plan) { return write_plan(canonicalize(plan)); }

Plan parse_plan(std::string_view text, const PlanParseOptions &opts)
{
    Plan plan;
    std::set<NodeId> root_set;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos)
            end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;

        auto tokens = tokenize(line, lineno);
        if (tokens.empty())
            continue;

        if (tokens[0] == "LEAF") {
            if (tokens.size() < 3 || tokens.size() > 4)
                throw ParseError(lineno, "LEAF", "expected 'LEAF <id> <collection> [kind]'");
            NodeId id = parse_id(tokens[1], lineno, "id");
            if (plan.contains(id))
                throw ParseError(lineno, "id", "duplicate node id " + tokens[1]);
            if (tokens[2] == "@site" && !opts.allow_site_leaf)
                throw ParseError(lineno, "collection", "'@site' is only valid inside a fragment");
            std::optional<DataKind> kind;
            if (tokens.size() == 4) {
                kind = parse_data_kind(tokens[3]);
                if (!kind)
                    throw ParseError(lineno, "kind", "unknown data kind '" + tokens[3] + "'");
            }
            plan.add_leaf(id, tokens[2], kind);
            continue;
        }

        if (tokens[0] == "ROOT") {
            if (tokens.size() != 2)
                throw ParseError(lineno, "ROOT", "expected 'ROOT <id>'");
            NodeId id = parse_id(tokens[1], lineno, "ROOT");
            if (root_set.insert(id).second)
                plan.roots.push_back(id);
            continue;
        }

        NodeId id = parse_id(tokens[0], lineno, "id");
        if (plan.contains(id))
            throw ParseError(lineno, "id", "duplicate node id " + tokens[0]);
        if (tokens.size() < 2)
            throw ParseError(lineno, "symbol", "missing operator symbol");
        auto symbol = parse_symbol(tokens[1]);
        if (!symbol)
            throw ParseError(lineno, "symbol", "unknown operator '" + tokens[1] + "'");

        OperatorInstance op{*symbol, {}};
        std::size_t i = 2;
        for (; i < tokens.size() && tokens[i] != "<-"; ++i) {
            auto eq = tokens[i].find('=');
            if (eq == std::string::npos || eq == 0)
                throw ParseError(lineno, "params", "expected name=value, got '" + tokens[i] + "'");
            std::string name = tokens[i].substr(0, eq);
            if (op.params.contains(name))
                throw ParseError(lineno, name, "duplicate parameter");
            op.params[name] = Param{tag_for_param(name), tokens[i].substr(eq + 1)};
        }
        if (i == tokens.size())
            throw ParseError(lineno, "children", "missing '<-' before child ids");
        std::vector<NodeId> children;
        for (++i; i < tokens.size(); ++i) {
            if (tokens[i] == "_") {
                if (!opts.allow_open_slots)
                    throw ParseError(lineno, "children", "open slot '_' is only valid in a skeleton");
                children.push_back(kNoNode);
            } else {
                children.push_back(parse_id(tokens[i], lineno, "children"));
            }
        }
        if (children.size() != op.kind().arity())
            throw ParseError(lineno, "children", std::string(op.kind().name) + " has arity " +
                                                     std::to_string(op.kind().arity()) + ", got " +
                                                     std::to_string(children.size()) + " children");
        check_required_params(op, lineno);
        plan.add_op(id, std::move(op), std::move(children));
    }
    finish(plan, opts, lineno);
    return plan;
}

/*======================================================================================================================
 * JSON encoding
 *====================================================================================================================*/

nlohmann::json plan_to_json(const Plan &plan)
{
    using nlohmann::json;
    json nodes = json::array();
    for (const auto &[id, node] : plan.nodes) {
        json n;
        n["id"] = id;
        if (node.is_leaf()) {
            n["collection"] = node.leaf().collection;
            if (node.leaf().kind)
                n["kind"] = std::string(to_string(*node.leaf().kind));
        } else {
            n["symbol"] = std::string(node.op().kind().name);
            json params = json::object();
            for (const auto &[name, p] : node.op().params)
                params[name] = p.value;
            n["params"] = std::move(params);
            json children = json::array();
            for (NodeId c : node.children)
                children.push_back(c == kNoNode ? json(nullptr) : json(c));
            n["children"] = std::move(children);
        }
        nodes.push_back(std::move(n));
    }
    return json{{"nodes", std::move(nodes)}, {"roots", plan.roots}};
}

Plan plan_from_json(const nlohmann::json &doc, const PlanParseOptions &opts)
{
    Plan plan;
    if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
        throw ParseError(0, "nodes", "plan document needs a 'nodes' array");
    std::size_t index = 0;
    for (const auto &n : doc["nodes"]) {
        ++index;
        const std::string where = "nodes[" + std::to_string(index - 1) + "]";
        if (!n.contains("id") || !n["id"].is_number_integer())
            throw ParseError(index, where + ".id", "missing integer id");
        NodeId id = n["id"].get<NodeId>();
        if (id < 0 || plan.contains(id))
            throw ParseError(index, where + ".id", "invalid or duplicate id");
        if (n.contains("collection")) {
            std::optional<DataKind> kind;
            if (n.contains("kind")) {
                kind = parse_data_kind(n["kind"].get<std::string>());
                if (!kind)
                    throw ParseError(index, where + ".kind", "unknown data kind");
            }
            auto coll = n["collection"].get<std::string>();
            if (coll == "@site" && !opts.allow_site_leaf)
                throw ParseError(index, where + ".collection", "'@site' is only valid inside a fragment");
            plan.add_leaf(id, coll, kind);
            continue;
        }
        if (!n.contains("symbol"))
            throw ParseError(index, where + ".symbol", "node needs 'symbol' or 'collection'");
        auto symbol = parse_symbol(n["symbol"].get<std::string>());
        if (!symbol)
            throw ParseError(index, where + ".symbol", "unknown operator");
        OperatorInstance op{*symbol, {}};
        if (n.contains("params"))
            for (const auto &[name, value] : n["params"].items())
                op.params[name] = Param{tag_for_param(name), value.is_string() ? value.get<std::string>() : value.dump()};
        std::vector<NodeId> children;
        if (n.contains("children"))
            for (const auto &c : n["children"]) {
                if (c.is_null()) {
                    if (!opts.allow_open_slots)
                        throw ParseError(index, where + ".children", "open slot only valid in a skeleton");
                    children.push_back(kNoNode);
                } else {
                    children.push_back(c.get<NodeId>());
                }
            }
        if (children.size() != op.kind().arity())
            throw ParseError(index, where + ".children", "arity mismatch");
        check_required_params(op, index);
        plan.add_op(id, std::move(op), std::move(children));
    }
    if (doc.contains("roots"))
        for (const auto &r : doc["roots"])
            plan.roots.push_back(r.get<NodeId>());
    finish(plan, opts, index);
    return plan;
}

Plan load_plan(std::string_view content, const PlanParseOptions &opts)
{
    auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && content[first] == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(content);
        } catch (const nlohmann::json::parse_error &e) {
            throw ParseError(0, "json", e.what());
        }
        return plan_from_json(doc, opts);
    }
    return parse_plan(content, opts);
}

}
