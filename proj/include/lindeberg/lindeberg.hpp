#pragma once

#include "lindeberg/core/distribution.hpp"
#include "lindeberg/core/io.hpp"
#include "lindeberg/core/seed.hpp"
#include "lindeberg/core/stats.hpp"
#include "lindeberg/exchangeable.hpp"
#include "lindeberg/resolvent.hpp"
#include "lindeberg/sampling.hpp"
#include "lindeberg/smooth_function.hpp"
#include "lindeberg/spectral.hpp"
#include "lindeberg/swapping.hpp"
