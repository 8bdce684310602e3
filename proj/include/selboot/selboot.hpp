#pragma once

#include "error.hpp"
#include "normal.hpp"
#include "random.hpp"
#include "parallel.hpp"
#include "regress.hpp"
#include "select.hpp"
#include "msboot.hpp"
#include "scalefit.hpp"
#include "infer.hpp"
#include "simulate.hpp"
#include "csv.hpp"
