#include "vibnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vibnn/rng.hpp"

namespace vibnn::io {

namespace {

std::vector<char> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

uint32_t be32(const std::vector<char>& b, size_t off) {
    return (uint32_t(uint8_t(b[off])) << 24) | (uint32_t(uint8_t(b[off + 1])) << 16) |
           (uint32_t(uint8_t(b[off + 2])) << 8) | uint32_t(uint8_t(b[off + 3]));
}

void require_size(const std::vector<char>& b, size_t expected, const std::string& path) {
    if (b.size() != expected)
        throw std::runtime_error(path + ": truncated or oversized payload, expected " +
                                 std::to_string(expected) + " bytes, got " +
                                 std::to_string(b.size()));
}

}  // namespace

Matrix read_idx_images(const std::string& path) {
    const auto b = read_file(path);
    if (b.size() < 16) throw std::runtime_error(path + ": too short for an IDX image header");
    const uint32_t magic = be32(b, 0);
    if (magic != 0x00000803)
        throw std::runtime_error(path + ": wrong magic at byte 0 (expected 0x00000803)");
    const uint32_t count = be32(b, 4), rows = be32(b, 8), cols = be32(b, 12);
    require_size(b, 16 + size_t(count) * rows * cols, path);
    Matrix m(count, size_t(rows) * cols);
    for (size_t i = 0; i < m.size(); ++i)
        m.data[i] = float(uint8_t(b[16 + i])) / 255.0f;
    return m;
}

std::vector<int> read_idx_labels(const std::string& path) {
    const auto b = read_file(path);
    if (b.size() < 8) throw std::runtime_error(path + ": too short for an IDX label header");
    const uint32_t magic = be32(b, 0);
    if (magic != 0x00000801)
        throw std::runtime_error(path + ": wrong magic at byte 0 (expected 0x00000801)");
    const uint32_t count = be32(b, 4);
    require_size(b, 8 + size_t(count), path);
    std::vector<int> labels(count);
    for (size_t i = 0; i < count; ++i) labels[i] = int(uint8_t(b[8 + i]));
    return labels;
}

Dataset read_idx(const std::string& images_path, const std::string& labels_path) {
    Dataset d;
    d.features = read_idx_images(images_path);
    d.labels = read_idx_labels(labels_path);
    if (d.features.rows != d.labels.size())
        throw std::runtime_error("image/label count mismatch: " +
                                 std::to_string(d.features.rows) + " vs " +
                                 std::to_string(d.labels.size()));
    int mx = 0;
    for (int l : d.labels) mx = std::max(mx, l);
    d.num_classes = mx + 1;
    return d;
}

Dataset read_csv_labeled(const std::string& path, const CsvSchema& schema) {
    if (schema.label_column < 0)
        throw std::invalid_argument("read_csv_labeled: schema must declare the label column");
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open file: " + path);

    Dataset d;
    std::vector<std::vector<float>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (lineno == 1 && schema.has_header) continue;
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size() && cell.find_first_not_of(" \t\r", used) != std::string::npos)
                    throw std::invalid_argument("trailing");
                cells.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ": non-numeric cell at row " +
                                         std::to_string(lineno) + ", column " +
                                         std::to_string(col + 1));
            }
            ++col;
        }
        if (schema.label_column >= int(cells.size()))
            throw std::runtime_error(path + ": label column out of range at row " +
                                     std::to_string(lineno));
        std::vector<int> fcols = schema.feature_columns;
        if (fcols.empty())
            for (int c = 0; c < int(cells.size()); ++c)
                if (c != schema.label_column) fcols.push_back(c);
        std::vector<float> feat;
        for (int c : fcols) {
            if (c >= int(cells.size()))
                throw std::runtime_error(path + ": feature column out of range at row " +
                                         std::to_string(lineno));
            feat.push_back(float(cells[c]));
        }
        rows.push_back(std::move(feat));
        d.labels.push_back(int(std::lround(cells[schema.label_column])));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no data rows");
    d.features = Matrix(rows.size(), rows[0].size());
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != d.features.cols)
            throw std::runtime_error(path + ": ragged row " + std::to_string(r + 1));
        std::copy(rows[r].begin(), rows[r].end(), d.features.row(r));
    }
    int mx = 0;
    for (int l : d.labels) mx = std::max(mx, l);
    d.num_classes = mx + 1;
    return d;
}

ZScoreStats zscore_fit(const Matrix& train) {
    ZScoreStats s;
    s.mean.assign(train.cols, 0.0);
    s.stddev.assign(train.cols, 0.0);
    for (size_t r = 0; r < train.rows; ++r)
        for (size_t c = 0; c < train.cols; ++c) s.mean[c] += train.at(r, c);
    for (auto& m : s.mean) m /= double(train.rows);
    for (size_t r = 0; r < train.rows; ++r)
        for (size_t c = 0; c < train.cols; ++c) {
            const double d = train.at(r, c) - s.mean[c];
            s.stddev[c] += d * d;
        }
    for (size_t c = 0; c < train.cols; ++c) {
        s.stddev[c] = std::sqrt(s.stddev[c] / double(train.rows));
        if (s.stddev[c] == 0.0) s.zero_variance_columns.push_back(int(c));
    }
    return s;
}

void zscore_apply(Matrix& features, const ZScoreStats& stats) {
    if (features.cols != stats.mean.size())
        throw std::invalid_argument("zscore_apply: column count mismatch");
    for (size_t r = 0; r < features.rows; ++r)
        for (size_t c = 0; c < features.cols; ++c) {
            if (stats.stddev[c] == 0.0) features.at(r, c) = 0.f;
            else features.at(r, c) = float((features.at(r, c) - stats.mean[c]) / stats.stddev[c]);
        }
}

Dataset subsample(const Dataset& data, double fraction, uint64_t seed,
                  std::vector<int>* vanished_classes) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("subsample: fraction must be in (0, 1]");
    if (fraction == 1.0) return data;

    std::vector<std::vector<size_t>> by_class(size_t(data.num_classes));
    for (size_t i = 0; i < data.labels.size(); ++i) by_class[data.labels[i]].push_back(i);

    std::vector<size_t> chosen;
    SplitMix64 rng(seed);
    for (int c = 0; c < data.num_classes; ++c) {
        auto& idx = by_class[c];
        const size_t want = size_t(std::lround(double(idx.size()) * fraction));
        if (want == 0 && !idx.empty() && vanished_classes) vanished_classes->push_back(c);
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.next_u64() % i]);
        for (size_t i = 0; i < want && i < idx.size(); ++i) chosen.push_back(idx[i]);
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.num_classes = data.num_classes;
    out.features = Matrix(chosen.size(), data.features.cols);
    for (size_t r = 0; r < chosen.size(); ++r) {
        std::copy(data.features.row(chosen[r]), data.features.row(chosen[r]) + data.features.cols,
                  out.features.row(r));
        out.labels.push_back(data.labels[chosen[r]]);
    }
    return out;
}

}  // namespace vibnn::io
