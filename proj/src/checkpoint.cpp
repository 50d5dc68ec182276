#include "asga/checkpoint.hpp"

#include <bit>
#include <fstream>

namespace asga {

namespace {

void write_le_double(std::ofstream& out, double v) {
    auto u = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((u >> (8 * i)) & 0xff);
    out.write(b, 8);
}

double read_le_double(std::ifstream& in, const std::filesystem::path& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (in.gcount() != 8)
        throw FormatError("checkpoint " + path.string() + " truncated in value block");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::pair<std::string, const ParamSet*>>& sections,
                     const json& extra) {
    json header;
    header["kind"] = kind;
    json jsec = json::array();
    for (const auto& [name, ps] : sections) {
        json params = json::array();
        for (int i = 0; i < ps->size(); ++i) {
            const Tensor& t = (*ps)[i];
            params.push_back({{"name", ps->name(i)}, {"rows", t.rows()}, {"cols", t.cols()}});
        }
        jsec.push_back({{"name", name}, {"params", std::move(params)}});
    }
    header["sections"] = std::move(jsec);
    header["extra"] = extra;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("cannot write checkpoint " + path.string());
    out << header.dump() << "\n";
    for (const auto& [name, ps] : sections)
        for (int i = 0; i < ps->size(); ++i)
            for (double v : (*ps)[i].values()) write_le_double(out, v);
    require(out.good(), "failed writing checkpoint " + path.string());
}

json read_checkpoint_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("checkpoint " + path.string() + " has no header line");
    try {
        return json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint " + path.string() + " header is not valid JSON: " +
                          e.what());
    }
}

json load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind,
                     const std::vector<std::pair<std::string, ParamSet*>>& sections) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("checkpoint " + path.string() + " has no header line");
    json header;
    try {
        header = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint " + path.string() + " header is not valid JSON: " +
                          e.what());
    }

    std::string kind = header.at("kind").get<std::string>();
    if (kind != expected_kind)
        throw FormatError("checkpoint " + path.string() + " is of kind \"" + kind +
                          "\", expected \"" + expected_kind + "\"");
    const json& jsec = header.at("sections");
    if (jsec.size() != sections.size())
        throw FormatError("checkpoint " + path.string() + " has " +
                          std::to_string(jsec.size()) + " sections, expected " +
                          std::to_string(sections.size()));

    for (std::size_t s = 0; s < sections.size(); ++s) {
        const auto& [name, ps] = sections[s];
        const json& sec = jsec[s];
        if (sec.at("name").get<std::string>() != name)
            throw FormatError("checkpoint section \"" + sec.at("name").get<std::string>() +
                              "\" does not match expected \"" + name + "\"");
        const json& params = sec.at("params");
        if (static_cast<int>(params.size()) != ps->size())
            throw FormatError("checkpoint section \"" + name + "\" has " +
                              std::to_string(params.size()) + " params, model has " +
                              std::to_string(ps->size()));
        for (int i = 0; i < ps->size(); ++i) {
            const json& pj = params[static_cast<std::size_t>(i)];
            Tensor& t = (*ps)[i];
            if (pj.at("name").get<std::string>() != ps->name(i) ||
                pj.at("rows").get<int>() != t.rows() || pj.at("cols").get<int>() != t.cols())
                throw FormatError("checkpoint param " + pj.at("name").get<std::string>() +
                                  " does not match model param " + ps->name(i) + " (" +
                                  t.shape_str() + ")");
            for (double& v : t.values()) v = read_le_double(in, path);
        }
    }
    return header.at("extra");
}

}  // namespace asga
