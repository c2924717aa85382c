#include "kwfp/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>

#include "kwfp/error.hpp"
#include "kwfp/util.hpp"

namespace kwfp {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("sha256: cannot allocate digest context");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);

    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<size_t>(got));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

void Manifest::add_input(const std::filesystem::path& path) {
    inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void Manifest::add_output(const std::filesystem::path& path) {
    outputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void Manifest::write(const std::filesystem::path& path) const {
    nlohmann::ordered_json j;
    j["tool"] = "kwfp";
    j["version"] = kToolVersion;
    j["subcommand"] = subcommand;
    j["argv"] = argv;
    j["config"] = config;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace kwfp
