#pragma once

#include "ispace/candidate.hpp"
#include "ispace/kernels.hpp"
#include "ispace/machine.hpp"

namespace ispace {

// The shipped space definition, embedded at build time. Identical to the
// installed spaces/gpu.space file.
const char* gpu_space_text();

// Host hooks binding one kernel and one machine to the space text. The
// returned callbacks copy what they need; the kernel may go away.
Providers gpu_providers(const Kernel& k, const MachineParams& mp);

// Parses and compiles the shipped space over the kernel backbone.
BuildResult build_gpu_space(const Kernel& k, const MachineParams& mp);

}  // namespace ispace
