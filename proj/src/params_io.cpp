#include "vibnn/params_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vibnn::io {

namespace {

void put_u16(std::string& out, uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char(v >> 8));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

class Reader {
  public:
    Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

    void expect_magic(const char* magic) {
        if (data_.size() < pos_ + 4 || data_.compare(pos_, 4, magic) != 0)
            throw std::runtime_error(path_ + ": bad magic at byte " + std::to_string(pos_));
        pos_ += 4;
    }
    uint16_t u16() {
        need(2);
        const uint16_t v = uint16_t(uint8_t(data_[pos_])) | (uint16_t(uint8_t(data_[pos_ + 1])) << 8);
        pos_ += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    uint8_t u8() {
        need(1);
        return uint8_t(data_[pos_++]);
    }
    float f32() {
        need(4);
        float v;
        std::memcpy(&v, data_.data() + pos_, 4);
        pos_ += 4;
        return v;
    }
    int32_t sle(int bytes) {
        need(size_t(bytes));
        uint32_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= uint32_t(uint8_t(data_[pos_ + i])) << (8 * i);
        pos_ += size_t(bytes);
        // sign-extend from bytes*8 bits
        const int shift = 32 - 8 * bytes;
        return int32_t(v << shift) >> shift;
    }
    void expect_end() {
        if (pos_ != data_.size())
            throw std::runtime_error(path_ + ": payload length mismatch, " +
                                     std::to_string(data_.size() - pos_) + " trailing bytes");
    }
    void need(size_t n) {
        if (pos_ + n > data_.size())
            throw std::runtime_error(path_ + ": truncated at byte " + std::to_string(pos_) +
                                     " (need " + std::to_string(n) + " more)");
    }

  private:
    std::string data_;
    std::string path_;
    size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void dump(const std::string& path, const std::string& data) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write file: " + path);
    f.write(data.data(), std::streamsize(data.size()));
}

}  // namespace

void write_params(const std::string& path, const bnn::VariationalParams& params) {
    std::string out;
    out += "VIBP";
    put_u16(out, kParamsFileVersion);
    put_u16(out, uint16_t(params.layers.size()));
    for (const auto& l : params.layers) {
        put_u32(out, uint32_t(l.mu_w.rows));
        put_u32(out, uint32_t(l.mu_w.cols));
    }
    for (const auto& l : params.layers)
        for (float v : l.mu_w.data) put_f32(out, v);
    for (const auto& l : params.layers)
        for (float v : l.rho_w.data) put_f32(out, v);
    for (const auto& l : params.layers)
        for (float v : l.mu_b) put_f32(out, v);
    for (const auto& l : params.layers)
        for (float v : l.rho_b) put_f32(out, v);
    dump(path, out);
}

bnn::VariationalParams read_params(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("VIBP");
    const uint16_t version = r.u16();
    if (version != kParamsFileVersion)
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    const uint16_t layers = r.u16();
    bnn::VariationalParams p;
    for (int l = 0; l < layers; ++l) {
        const uint32_t rows = r.u32(), cols = r.u32();
        bnn::VariationalParams::Layer lay;
        lay.mu_w = Matrix(rows, cols);
        lay.rho_w = Matrix(rows, cols);
        lay.mu_b.resize(rows);
        lay.rho_b.resize(rows);
        p.layers.push_back(std::move(lay));
    }
    for (auto& l : p.layers)
        for (auto& v : l.mu_w.data) v = r.f32();
    for (auto& l : p.layers)
        for (auto& v : l.rho_w.data) v = r.f32();
    for (auto& l : p.layers)
        for (auto& v : l.mu_b) v = r.f32();
    for (auto& l : p.layers)
        for (auto& v : l.rho_b) v = r.f32();
    r.expect_end();
    return p;
}

void write_quant(const std::string& path, const bnn::QuantizedParams& params) {
    std::string out;
    out += "VIBQ";
    put_u16(out, kParamsFileVersion);
    out.push_back(char(params.spec.total_bits));
    out.push_back(char(params.spec.frac_bits));
    put_u16(out, uint16_t(params.layers.size()));
    for (const auto& l : params.layers) {
        put_u32(out, uint32_t(l.out));
        put_u32(out, uint32_t(l.in));
        out.push_back(char(uint8_t(l.out_shift)));
    }
    const int bytes = (params.spec.total_bits + 7) / 8;
    auto put_raw = [&](int32_t v) {
        for (int i = 0; i < bytes; ++i) out.push_back(char((uint32_t(v) >> (8 * i)) & 0xff));
    };
    for (const auto& l : params.layers) {
        for (auto v : l.mu_w) put_raw(v);
        for (auto v : l.mu_b) put_raw(v);
    }
    for (const auto& l : params.layers) {
        for (auto v : l.sigma_w) put_raw(v);
        for (auto v : l.sigma_b) put_raw(v);
    }
    dump(path, out);
}

bnn::QuantizedParams read_quant(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("VIBQ");
    const uint16_t version = r.u16();
    if (version != kParamsFileVersion)
        throw std::runtime_error(path + ": unsupported version " + std::to_string(version));
    bnn::QuantizedParams p;
    p.spec.total_bits = r.u8();
    p.spec.frac_bits = r.u8();
    p.spec.is_signed = true;
    p.spec.validate();
    const uint16_t layers = r.u16();
    int cum_shift = 0;
    for (int l = 0; l < layers; ++l) {
        bnn::QuantizedParams::Layer lay;
        lay.out = r.u32();
        lay.in = r.u32();
        lay.out_shift = r.u8();
        lay.bias_shift = cum_shift;  // derived, not stored
        cum_shift += lay.out_shift;
        p.layers.push_back(std::move(lay));
    }
    const int bytes = (p.spec.total_bits + 7) / 8;
    for (auto& l : p.layers) {
        l.mu_w.resize(l.out * l.in);
        for (auto& v : l.mu_w) v = r.sle(bytes);
        l.mu_b.resize(l.out);
        for (auto& v : l.mu_b) v = r.sle(bytes);
    }
    for (auto& l : p.layers) {
        l.sigma_w.resize(l.out * l.in);
        for (auto& v : l.sigma_w) v = r.sle(bytes);
        l.sigma_b.resize(l.out);
        for (auto& v : l.sigma_b) v = r.sle(bytes);
    }
    r.expect_end();
    return p;
}

}  // namespace vibnn::io
