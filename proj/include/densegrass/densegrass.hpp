#pragma once

#include <densegrass/types.hpp>
#include <densegrass/core.hpp>
#include <densegrass/grassmann.hpp>
#include <densegrass/lowdim.hpp>
#include <densegrass/assignment.hpp>
#include <densegrass/kmeans.hpp>
#include <densegrass/clustering.hpp>
#include <densegrass/partition.hpp>
#include <densegrass/solver.hpp>
#include <densegrass/bench.hpp>
#include <densegrass/io.hpp>
#include <densegrass/config.hpp>
