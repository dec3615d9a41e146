#include "primix/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace primix {

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc())
        throw std::runtime_error("csv: bad number '" + s + "'");
    return v;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);  // binary: no platform newline games
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for read: " + path);
    return f;
}

void append_channel_header(std::ostream& os, const std::string& prefix, Index d) {
    static const char* channels[] = {"theta", "omega", "tau"};
    for (const char* ch : channels)
        for (Index j = 0; j < d; ++j)
            os << ',' << prefix << ch << '_' << j;
}

void append_state(std::ostream& os, const RobotState& s) {
    const Vec v = flatten(s);
    for (Index j = 0; j < v.size(); ++j) os << ',' << format_double(v[j]);
}

}  // namespace

void write_demonstration_csv(const std::string& path, const Demonstration& demo) {
    if (demo.leader.length() != demo.follower.length())
        throw std::invalid_argument("demonstration: leader/follower length mismatch");
    auto f = open_out(path);
    const Index d = demo.dof();
    f << 't';
    append_channel_header(f, "l_", d);
    append_channel_header(f, "f_", d);
    f << '\n';
    for (Index i = 0; i < demo.length(); ++i) {
        f << format_double(static_cast<double>(i) * demo.leader.dt);
        append_state(f, demo.leader.states[i]);
        append_state(f, demo.follower.states[i]);
        f << '\n';
    }
}

namespace {

// Reads the shared body of trajectory-style CSVs: a time column followed by
// one or two flattened-state blocks.
void read_rows(std::ifstream& f, const std::string& path, Index blocks,
               std::vector<Vec>& out_blocks, double& dt) {
    std::string line;
    if (!std::getline(f, line))
        throw std::runtime_error("csv: empty file " + path);
    const Index ncols = static_cast<Index>(split_line(line).size());
    if ((ncols - 1) % (3 * blocks) != 0 || ncols < 1 + 3 * blocks)
        throw std::runtime_error("csv: bad header in " + path);

    std::vector<double> times;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (static_cast<Index>(cells.size()) != ncols)
            throw std::runtime_error("csv: ragged row in " + path);
        times.push_back(parse_double(cells[0]));
        Vec row(ncols - 1);
        for (Index j = 1; j < ncols; ++j) row[j - 1] = parse_double(cells[j]);
        out_blocks.push_back(std::move(row));
    }
    if (times.size() < 2)
        throw std::runtime_error("csv: need at least 2 rows to infer dt in " + path);
    dt = times[1] - times[0];
    if (dt <= 0) throw std::runtime_error("csv: non-positive dt in " + path);
}

}  // namespace

Demonstration read_demonstration_csv(const std::string& path) {
    auto f = open_in(path);
    std::vector<Vec> rows;
    double dt = 0;
    read_rows(f, path, 2, rows, dt);
    Demonstration demo;
    demo.leader.dt = demo.follower.dt = dt;
    for (const Vec& row : rows) {
        const Index half = row.size() / 2;
        demo.leader.states.push_back(unflatten(row.segment(0, half)));
        demo.follower.states.push_back(unflatten(row.segment(half, half)));
    }
    return demo;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    auto f = open_out(path);
    f << 't';
    append_channel_header(f, "", traj.dof());
    f << '\n';
    for (Index i = 0; i < traj.length(); ++i) {
        f << format_double(static_cast<double>(i) * traj.dt);
        append_state(f, traj.states[i]);
        f << '\n';
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    auto f = open_in(path);
    std::vector<Vec> rows;
    double dt = 0;
    read_rows(f, path, 1, rows, dt);
    Trajectory traj;
    traj.dt = dt;
    for (const Vec& row : rows) traj.states.push_back(unflatten(row));
    return traj;
}

void write_table_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
    auto f = open_out(path);
    for (std::size_t i = 0; i < header.size(); ++i)
        f << (i ? "," : "") << header[i];
    f << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            f << (i ? "," : "") << format_double(row[i]);
        f << '\n';
    }
}

std::vector<std::vector<double>> read_table_csv(const std::string& path,
                                                std::vector<std::string>* header) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line))
        throw std::runtime_error("csv: empty file " + path);
    if (header) *header = split_line(line);
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& cell : split_line(line)) row.push_back(parse_double(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace primix
