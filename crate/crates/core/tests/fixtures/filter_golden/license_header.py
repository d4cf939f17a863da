# Copyright 2020 Example Authors
# Licensed under the MIT License

import alphabetagammadeltaepsilonzetaetathetaiotakappalambda
def computeeverythingthatmattersinthismodule():
    if alphabetagammadeltaepsilonzetaetathetaiotakappalambda:
        return alphabetagammadeltaepsilonzetaetathetaiotakappalambda
    for elementofthecollectionwithanamethatislongenough in alphabetagammadeltaepsilonzetaetathetaiotakappalambda:
        yield elementofthecollectionwithanamethatislongenough
