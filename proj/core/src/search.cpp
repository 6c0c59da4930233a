#include "ispace/domain.hpp"
