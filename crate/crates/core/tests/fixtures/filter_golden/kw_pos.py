import alphabetagammadeltaepsilonzetaetathetaiotakappalambda
def computeeverythingthatmattersinthismodule():
    for elementofthecollectionwithanamethatislongenough in alphabetagammadeltaepsilonzetaetathetaiotakappalambda:
        yield elementofthecollectionwithanamethatislongenough
    return alphabetagammadeltaepsilonzetaetathetaiotakappalambda
