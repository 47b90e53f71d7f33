#pragma once

#include "bact/dataset.hpp"

#include <array>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace bact
{

namespace fs = std::filesystem;

class LoadError : public Error
{
public:
    enum class Kind
    {
        MissingFile,
        UnknownLabel,
        LengthMismatch,
        Format,
    };

    LoadError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Binary feature file: 8-byte magic, uint32 T, uint32 D (little-endian),
// followed by T*D little-endian float32 values in row-major order.
inline constexpr std::array<char, 8> kFeatureMagic = {'B', 'A', 'C', 'T', 'F', 'E', 'A', 'T'};

namespace detail
{

inline void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LoadError(LoadError::Kind::MissingFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

/// Writes via a sibling temp file and rename, so readers never see a
/// partially written file.
inline void write_file_atomic(const fs::path& path, std::string_view bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::vector<std::string> read_lines(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

} // namespace detail

inline std::string encode_features(const FeatureMatrix& m)
{
    std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 4);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        std::uint32_t bits;
        const float f = m.data()[i];
        std::memcpy(&bits, &f, 4);
        detail::put_u32(out, bits);
    }
    return out;
}

inline FeatureMatrix decode_features(std::string_view bytes, const std::string& what = "features")
{
    if (bytes.size() < 16 || !std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin()))
        throw LoadError(LoadError::Kind::Format, what + ": bad feature header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t T = detail::get_u32(p + 8);
    const std::uint32_t D = detail::get_u32(p + 12);
    if (bytes.size() != 16 + static_cast<std::size_t>(T) * D * 4)
        throw LoadError(LoadError::Kind::Format, what + ": payload size does not match header");
    FeatureMatrix m(T, D);
    for (std::size_t i = 0; i < static_cast<std::size_t>(T) * D; ++i) {
        const std::uint32_t bits = detail::get_u32(p + 16 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        m.data()[i] = f;
    }
    return m;
}

/// One frame per line, comma separated.
inline FeatureMatrix parse_feature_csv(std::string_view text, const std::string& what = "features")
{
    std::vector<std::vector<float>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto content = detail::trim(line);
        if (content.empty())
            continue;
        std::vector<float> row;
        std::string_view rest = content;
        while (true) {
            const auto comma = rest.find(',');
            const auto cell = detail::trim(rest.substr(0, comma));
            float f = 0;
            const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), f);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw LoadError(LoadError::Kind::Format, what + ": bad number '" + cell + "'");
            row.push_back(f);
            if (comma == std::string_view::npos)
                break;
            rest = rest.substr(comma + 1);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw LoadError(LoadError::Kind::Format, what + ": ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw LoadError(LoadError::Kind::Format, what + ": no rows");
    FeatureMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

inline std::string format_feature_csv(const FeatureMatrix& m)
{
    std::string out;
    char buf[32];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
            if (j)
                out.push_back(',');
            out.append(buf, ptr);
        }
        out.push_back('\n');
    }
    return out;
}

/// Reads a dataset root:
///   features/<id>.feat | features/<id>.csv
///   groundTruth/<id>.txt   (optional per video; one class name per frame)
///   mapping.txt            ("<int> <class name>" per line)
///   splits/train.txt, splits/test.txt (optional; one id per line)
inline Dataset load_dataset(const fs::path& root)
{
    Dataset ds;
    const fs::path mapping = root / "mapping.txt";
    if (!fs::exists(mapping))
        throw LoadError(LoadError::Kind::MissingFile, "missing " + mapping.string());
    std::map<int, std::string> by_index;
    for (const auto& raw : detail::read_lines(mapping)) {
        const auto line = detail::trim(raw);
        if (line.empty())
            continue;
        const auto sp = line.find_first_of(" \t");
        int idx = -1;
        const auto [ptr, ec] = std::from_chars(line.data(), line.data() + std::min(sp, line.size()), idx);
        if (sp == std::string::npos || ec != std::errc() || idx < 0)
            throw LoadError(LoadError::Kind::Format, "mapping.txt: bad line '" + line + "'");
        by_index[idx] = detail::trim(std::string_view(line).substr(sp + 1));
    }
    std::map<std::string, int> name_to_id;
    for (const auto& [idx, name] : by_index) {
        if (idx != static_cast<int>(ds.class_names.size()))
            throw LoadError(LoadError::Kind::Format, "mapping.txt: class indices must be 0..C-1 without gaps");
        name_to_id[name] = idx;
        ds.class_names.push_back(name);
    }

    const fs::path feat_dir = root / "features";
    if (!fs::is_directory(feat_dir))
        throw LoadError(LoadError::Kind::MissingFile, "missing directory " + feat_dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(feat_dir))
        if (e.is_regular_file() && (e.path().extension() == ".feat" || e.path().extension() == ".csv"))
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    for (const auto& f : files) {
        VideoRecord v;
        v.id = f.stem().string();
        if (ds.find(v.id))
            throw LoadError(LoadError::Kind::Format, "video '" + v.id + "' has both .feat and .csv features");
        const auto bytes = detail::read_file(f);
        v.features = f.extension() == ".feat" ? decode_features(bytes, v.id) : parse_feature_csv(bytes, v.id);

        const fs::path gt = root / "groundTruth" / (v.id + ".txt");
        if (fs::exists(gt)) {
            Labels labels;
            for (const auto& raw : detail::read_lines(gt)) {
                const auto name = detail::trim(raw);
                if (name.empty())
                    continue;
                const auto it = name_to_id.find(name);
                if (it == name_to_id.end())
                    throw LoadError(LoadError::Kind::UnknownLabel,
                                    "video '" + v.id + "': label '" + name + "' not in mapping.txt");
                labels.push_back(it->second);
            }
            if (static_cast<int>(labels.size()) != v.length())
                throw LoadError(LoadError::Kind::LengthMismatch,
                                "video '" + v.id + "': " + std::to_string(labels.size()) + " labels vs " +
                                    std::to_string(v.length()) + " feature rows");
            v.gt_labels = std::move(labels);
        }
        ds.videos.push_back(std::move(v));
    }

    // splits/train.txt, or the split1 bundles of the public benchmarks
    // whose entries carry a .txt suffix.
    const auto read_split = [&](std::initializer_list<const char*> names, std::vector<std::string>& out) {
        for (const char* name : names) {
            const fs::path p = root / "splits" / name;
            if (!fs::exists(p))
                continue;
            for (const auto& raw : detail::read_lines(p)) {
                auto id = detail::trim(raw);
                if (id.size() > 4 && id.ends_with(".txt"))
                    id.resize(id.size() - 4);
                if (id.empty())
                    continue;
                if (!ds.find(id))
                    throw LoadError(LoadError::Kind::MissingFile, std::string(name) + " lists unknown video '" + id + "'");
                out.push_back(std::move(id));
            }
            return true;
        }
        return false;
    };
    const bool has_train = read_split({"train.txt", "train.split1.bundle"}, ds.train_ids);
    const bool has_test = read_split({"test.txt", "test.split1.bundle"}, ds.test_ids);
    if (!has_train && !has_test && !ds.videos.empty()) {
        warn("no split files under " + (root / "splits").string() + "; using every video for training");
        for (const auto& v : ds.videos)
            ds.train_ids.push_back(v.id);
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const fs::path& root, bool csv_features = false)
{
    ds.validate();
    fs::create_directories(root / "features");
    fs::create_directories(root / "groundTruth");
    fs::create_directories(root / "splits");

    std::string mapping;
    for (int c = 0; c < ds.num_classes(); ++c)
        mapping += std::to_string(c) + " " + ds.class_names[static_cast<std::size_t>(c)] + "\n";
    detail::write_file_atomic(root / "mapping.txt", mapping);

    std::set<fs::path> keep;
    for (const auto& v : ds.videos) {
        const fs::path fp = root / "features" / (v.id + (csv_features ? ".csv" : ".feat"));
        detail::write_file_atomic(fp, csv_features ? format_feature_csv(v.features) : encode_features(v.features));
        keep.insert(fp);
        if (v.gt_labels) {
            std::string text;
            for (int y : *v.gt_labels)
                text += ds.class_names[static_cast<std::size_t>(y)] + "\n";
            const fs::path gp = root / "groundTruth" / (v.id + ".txt");
            detail::write_file_atomic(gp, text);
            keep.insert(gp);
        }
    }
    // Drop files left over from a previous dataset at this root.
    for (const char* sub : {"features", "groundTruth"})
        for (const auto& e : fs::directory_iterator(root / sub))
            if (e.is_regular_file() && !keep.contains(e.path()))
                fs::remove(e.path());

    const auto join = [](const std::vector<std::string>& ids) {
        std::string s;
        for (const auto& id : ids)
            s += id + "\n";
        return s;
    };
    detail::write_file_atomic(root / "splits" / "train.txt", join(ds.train_ids));
    detail::write_file_atomic(root / "splits" / "test.txt", join(ds.test_ids));
}

} // namespace bact
