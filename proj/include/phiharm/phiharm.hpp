#pragma once

#include "core.hpp"
#include "geometry.hpp"
#include "ssu.hpp"
#include "energy.hpp"
#include "flows.hpp"
#include "average.hpp"
#include "spectral.hpp"
#include "report.hpp"
#include "acceptance.hpp"
