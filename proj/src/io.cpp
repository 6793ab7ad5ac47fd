#include "voxnox/io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "voxnox/error.hpp"

namespace voxnox {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
    const std::filesystem::path target(path);
    if (target.has_parent_path())
        std::filesystem::create_directories(target.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorCode::io, "cannot write '" + tmp + "'");
        out.write(contents.data(), std::streamsize(contents.size()));
        if (!out)
            throw Error(ErrorCode::io, "short write to '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec)
        throw Error(ErrorCode::io, "cannot rename '" + tmp + "': " + ec.message());
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

} // namespace voxnox
